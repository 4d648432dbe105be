"""Symbolic corpus revision: merge, delete, add, zero.

Every operation is a pure function from one corpus snapshot to the next
(version + 1); callers that need rollback simply keep the old snapshot.
Deleting a concept follows a three-way case split on how many live
concepts remain: none -> the block is marked uninformative and always
emits the sentinel; exactly one -> the deleted entries are relabeled to
the sentinel id 0 so the block keeps a binary informative/other split;
two or more -> the entries are removed outright and the id is retired.
Retired ids are never reused: fresh concepts get high-water-mark + 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .corpus import (
    EXEMPLAR,
    PROTOTYPE,
    SENTINEL,
    BlockCorpus,
    CorpusEntry,
    RetrievalCorpus,
)
from .errors import DomainError, FormatError, ValidationError

FEEDBACK_FORMAT = "feedback/1"

ACTION_NAMES = (
    "merge",
    "delete_concept",
    "delete_entry",
    "add_entry",
    "add_concept",
    "zero_concept",
)


def _block(corpus: RetrievalCorpus, j: int) -> BlockCorpus:
    if not (0 <= j < corpus.n_blocks):
        raise DomainError(f"block {j} out of range")
    return corpus.blocks[j]


def _require_live(block: BlockCorpus, m: int) -> None:
    if m < 1 or m not in block.live_concepts():
        raise DomainError(f"concept {m} is not live in this block")


def _demote_extra_prototypes(block: BlockCorpus, concept_id: int) -> None:
    """Keep the lowest-index prototype of a concept, re-flag the rest."""
    seen = False
    for l, e in block.entries_of(concept_id):
        if e.kind != PROTOTYPE:
            continue
        if seen:
            block.replace(l, CorpusEntry(e.vec, e.concept_id, EXEMPLAR))
        seen = True


def merge_concepts(corpus: RetrievalCorpus, j: int, m: int, b: int) -> RetrievalCorpus:
    """Relabel every entry of concept m to b. Both prototypes survive as
    entries of b, with m's re-flagged exemplar, so retrieval geometry is
    untouched while id m disappears."""
    if m == b:
        raise DomainError("cannot merge a concept into itself")
    out = corpus.clone()
    block = _block(out, j)
    _require_live(block, m)
    _require_live(block, b)
    for l, e in block.entries_of(m):
        kind = EXEMPLAR if e.kind == PROTOTYPE else e.kind
        block.replace(l, CorpusEntry(e.vec, b, kind))
    block.masked.discard(m)
    out.version += 1
    out.validate()
    return out


def delete_concept(corpus: RetrievalCorpus, j: int, m: int) -> RetrievalCorpus:
    out = corpus.clone()
    block = _block(out, j)
    _require_live(block, m)
    remaining = [v for v in block.live_concepts() if v != m]
    if not remaining:
        # Case 1: no information left; block collapses to the sentinel.
        for l, _e in block.live_items():
            block.replace(l, None)
        block.deleted_to_single = True
        block.masked.clear()
    elif len(remaining) == 1:
        # Case 2: keep a binary informative/other split via the sentinel.
        for l, e in block.entries_of(m):
            block.replace(l, CorpusEntry(e.vec, SENTINEL, e.kind))
        _demote_extra_prototypes(block, SENTINEL)
        block.masked.discard(m)
    else:
        # Case 3: remove the encodings; the id is retired.
        for l, _e in block.entries_of(m):
            block.replace(l, None)
        block.masked.discard(m)
    out.version += 1
    out.validate()
    return out


def delete_entry(
    corpus: RetrievalCorpus, j: int, l: int, allow_concept_removal: bool = False
) -> RetrievalCorpus:
    """Tombstone one entry; later indices keep their identity.

    Deleting a concept's prototype promotes its nearest remaining
    exemplar. Deleting a live concept's last entry is routed through
    delete_concept semantics, but only with explicit confirmation.
    """
    out = corpus.clone()
    block = _block(out, j)
    if not (0 <= l < len(block.entries)) or block.entries[l] is None:
        raise DomainError(f"entry {l} does not exist")
    entry = block.entries[l]
    others = [(i, e) for i, e in block.entries_of(entry.concept_id) if i != l]
    if not others and entry.concept_id >= 1:
        if not allow_concept_removal:
            raise DomainError(
                f"entry {l} is the last of concept {entry.concept_id}; "
                "confirm concept removal to proceed"
            )
        return delete_concept(corpus, j, entry.concept_id)
    block.replace(l, None)
    if entry.kind == PROTOTYPE and others:
        dists = [
            (float(np.linalg.norm(e.vec - entry.vec)), i) for i, e in others
        ]
        _d, promote = min(dists)
        e = block.entries[promote]
        block.replace(promote, CorpusEntry(e.vec, e.concept_id, PROTOTYPE))
    out.version += 1
    out.validate()
    return out


def add_entry(corpus: RetrievalCorpus, j: int, enc, m: int) -> RetrievalCorpus:
    out = corpus.clone()
    block = _block(out, j)
    _require_live(block, m)
    vec = np.asarray(enc, dtype=np.float64)
    if vec.shape != (block.block_dim,):
        raise ValidationError("encoding dimension mismatch")
    block.append(CorpusEntry(vec, m, EXEMPLAR))
    out.version += 1
    out.validate()
    return out


def add_concept(corpus: RetrievalCorpus, j: int, encs) -> RetrievalCorpus:
    """Allocate id high-water-mark + 1 with the mean of `encs` as its
    prototype and the encodings themselves as exemplars. Adding to a
    block that had collapsed to the sentinel revives it."""
    out = corpus.clone()
    block = _block(out, j)
    vecs = [np.asarray(e, dtype=np.float64) for e in encs]
    if not vecs:
        raise ValidationError("add_concept needs at least one encoding")
    if any(v.shape != (block.block_dim,) for v in vecs):
        raise ValidationError("encoding dimension mismatch")
    new_id = block.n_concepts + 1
    block.n_concepts = new_id
    block.append(CorpusEntry(np.mean(vecs, axis=0), new_id, PROTOTYPE))
    for v in vecs:
        block.append(CorpusEntry(v, new_id, EXEMPLAR))
    block.deleted_to_single = False
    out.version += 1
    out.validate()
    return out


def zero_concept(corpus: RetrievalCorpus, j: int, m: int) -> RetrievalCorpus:
    """Mark a concept so the multi-hot transform drops its coordinate.
    Retrieval itself is untouched; the mask acts downstream."""
    out = corpus.clone()
    block = _block(out, j)
    if m not in block.present_concepts():
        raise DomainError(f"concept {m} is not present in this block")
    block.masked.add(m)
    out.version += 1
    out.validate()
    return out


# ---------------------------------------------------------------------------
# Feedback documents and the revision log
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LogEntry:
    action: dict
    actor: str
    version_before: int
    version_after: int
    timestamp: str | None = None

    def to_dict(self) -> dict:
        return {
            "action": self.action,
            "actor": self.actor,
            "version_before": self.version_before,
            "version_after": self.version_after,
            "timestamp": self.timestamp,
        }

    @staticmethod
    def from_dict(d: dict) -> "LogEntry":
        return LogEntry(
            action=d["action"],
            actor=d["actor"],
            version_before=d["version_before"],
            version_after=d["version_after"],
            timestamp=d.get("timestamp"),
        )


def validate_action(action: dict) -> dict:
    if not isinstance(action, dict):
        raise FormatError("action must be an object")
    name = action.get("action")
    if name not in ACTION_NAMES:
        raise FormatError(f"unknown action {name!r}")
    if not isinstance(action.get("block"), int):
        raise FormatError("action needs an integer 'block'")
    required = {
        "merge": {"m", "b"},
        "delete_concept": {"m"},
        "delete_entry": {"l"},
        "add_entry": {"enc", "m"},
        "add_concept": {"encs"},
        "zero_concept": {"m"},
    }[name]
    missing = required - set(action)
    if missing:
        raise FormatError(f"action {name!r} missing fields {sorted(missing)}")
    return action


def apply_action(corpus: RetrievalCorpus, action: dict) -> RetrievalCorpus:
    action = validate_action(action)
    j = action["block"]
    name = action["action"]
    if name == "merge":
        return merge_concepts(corpus, j, action["m"], action["b"])
    if name == "delete_concept":
        return delete_concept(corpus, j, action["m"])
    if name == "delete_entry":
        return delete_entry(
            corpus, j, action["l"], allow_concept_removal=action.get("confirm", False)
        )
    if name == "add_entry":
        return add_entry(corpus, j, action["enc"], action["m"])
    if name == "add_concept":
        return add_concept(corpus, j, action["encs"])
    return zero_concept(corpus, j, action["m"])


def validate_feedback(document: dict) -> dict:
    if not isinstance(document, dict):
        raise FormatError("feedback document must be an object")
    if document.get("schema") != FEEDBACK_FORMAT:
        raise FormatError(f"unsupported feedback schema {document.get('schema')!r}")
    if not isinstance(document.get("actor"), str) or not document["actor"]:
        raise FormatError("feedback document needs a nonempty 'actor'")
    actions = document.get("actions")
    if not isinstance(actions, list) or not actions:
        raise FormatError("feedback document needs a nonempty 'actions' list")
    for i, action in enumerate(actions):
        try:
            validate_action(action)
        except FormatError as exc:
            raise FormatError(f"action {i}: {exc}") from exc
    return document


def loads_feedback(text: str) -> dict:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"feedback document is not valid JSON: {exc}") from exc
    return validate_feedback(document)


def apply_feedback(
    corpus: RetrievalCorpus, document: dict, timestamp: str | None = None
) -> tuple:
    """Apply a whole feedback document transactionally.

    Any failing action aborts the document: the input corpus is never
    mutated, so the caller's snapshot stays authoritative. Returns the
    new corpus and one log entry per applied action.
    """
    document = validate_feedback(document)
    actor = document["actor"]
    current = corpus
    entries = []
    for i, action in enumerate(document["actions"]):
        before = current.version
        try:
            current = apply_action(current, action)
        except (DomainError, ValidationError) as exc:
            raise DomainError(f"action {i} ({action.get('action')}): {exc}") from exc
        entries.append(
            LogEntry(
                action=action,
                actor=actor,
                version_before=before,
                version_after=current.version,
                timestamp=timestamp,
            )
        )
    return current, entries


def save_log(path, entries) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        for e in entries:
            fh.write(json.dumps(e.to_dict(), sort_keys=True) + "\n")


def load_log(path) -> list:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(LogEntry.from_dict(json.loads(line)))
            except (KeyError, json.JSONDecodeError) as exc:
                raise FormatError(f"log line {line_no} malformed: {exc}") from exc
    for a, b in zip(out, out[1:]):
        if b.version_before != a.version_after:
            raise FormatError("revision log versions must chain")
    return out
