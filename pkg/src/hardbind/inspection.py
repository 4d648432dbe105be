"""Read-only queries over a corpus plus a labeled dataset: example-based
(implicit), side-by-side (comparative), swap-based (interventional) and
distance-based (similarity) inspection. None of these mutate the corpus;
they power the CLI `inspect` command and the HTTP API.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import SENTINEL, RetrievalCorpus, infer
from .encodings import SyntheticDecoder
from .errors import DomainError


@dataclass
class MatchedSample:
    scene_id: int
    slot_id: int
    factors: dict | None  # ground-truth factors when the dataset has them


@dataclass
class ConceptCard:
    block: int
    concept_id: int
    prototype: np.ndarray
    exemplars: list
    matched: list  # list[MatchedSample]
    population_share: float


@dataclass
class SimilarityReport:
    block: int
    anchor: int
    ranked: list  # [(concept id, prototype distance)], ascending


def dataset_concepts(
    corpus: RetrievalCorpus,
    scenes,
    slot_mode: str = "max_one",
    threshold: float | None = None,
):
    """Inferred (scene_id, slot_id, concept_ids, factors) rows for every
    object slot in the dataset; the shared substrate of the queries."""
    rows = []
    for i, scene in enumerate(scenes):
        slot_factors = {
            slot: obj.factor_values
            for obj, slot in zip(scene.objects, scene.object_slot_ids)
        }
        for cs in infer(corpus, scene.encoding, slot_mode=slot_mode, threshold=threshold):
            rows.append((i, cs.slot_id, cs.concept_ids, slot_factors.get(cs.slot_id)))
    return rows


def _require_present(corpus, j, v):
    if not (0 <= j < corpus.n_blocks):
        raise DomainError(f"block {j} out of range")
    block = corpus.blocks[j]
    if block.deleted_to_single or v not in block.present_concepts():
        raise DomainError(f"concept {v} is not present in block {j}")
    return block


def implicit_inspect(
    corpus: RetrievalCorpus,
    j: int,
    v: int,
    dataset=None,
    max_samples: int = 8,
    inferred=None,
    slot_mode: str = "max_one",
    threshold: float | None = None,
) -> ConceptCard:
    """Exemplars of (j, v) plus dataset objects inferred to v in block j.

    Population share is the fraction of all inferred dataset objects
    mapping to v; precomputed `inferred` rows may be passed to avoid
    re-running inference per query.
    """
    block = _require_present(corpus, j, v)
    _l, proto = block.prototype_of(v)
    exemplars = [e.vec for _i, e in block.entries_of(v) if e.kind != "prototype"]
    matched: list = []
    share = 0.0
    if dataset is not None or inferred is not None:
        rows = inferred if inferred is not None else dataset_concepts(
            corpus, dataset, slot_mode, threshold
        )
        hits = [r for r in rows if r[2][j] == v]
        share = len(hits) / len(rows) if rows else 0.0
        matched = [
            MatchedSample(scene_id=r[0], slot_id=r[1], factors=r[3])
            for r in hits[:max_samples]
        ]
    return ConceptCard(
        block=j,
        concept_id=v,
        prototype=proto.vec,
        exemplars=exemplars,
        matched=matched,
        population_share=share,
    )


def comparative_inspect(
    corpus: RetrievalCorpus,
    j: int,
    v1: int,
    v2: int,
    dataset=None,
    max_samples: int = 8,
    inferred=None,
) -> tuple:
    """Two cards side by side plus their prototype distance, for
    questions of the form "why this concept and not that one"."""
    if v1 == v2:
        raise DomainError("comparative inspection needs two distinct concepts")
    card1 = implicit_inspect(corpus, j, v1, dataset, max_samples, inferred=inferred)
    card2 = implicit_inspect(corpus, j, v2, dataset, max_samples, inferred=inferred)
    distance = float(np.linalg.norm(card1.prototype - card2.prototype))
    return card1, card2, distance


@dataclass
class InterventionResult:
    before: dict
    after: dict
    changed: list  # category names whose decoded value differs
    no_visible_effect: bool  # swap hit a block that carries no factor


def interventional_inspect(
    scene,
    slot: int,
    j: int,
    v: int,
    corpus: RetrievalCorpus,
    decoder: SyntheticDecoder,
    entry_index: int | None = None,
) -> InterventionResult:
    """Swap one block of one slot with a representative of (j, v) and
    decode factors before and after. Only the factor carried by block j
    can change; distractor blocks are flagged as having no effect."""
    z = np.asarray(scene.encoding.z, dtype=np.float64)
    if not (0 <= slot < z.shape[0]):
        raise DomainError(f"slot {slot} out of range")
    if not (0 <= j < corpus.n_blocks):
        raise DomainError(f"block {j} out of range")
    block = _require_present(corpus, j, v)
    if entry_index is None:
        _l, entry = block.prototype_of(v)
    else:
        if not (0 <= entry_index < len(block.entries)) or block.entries[entry_index] is None:
            raise DomainError(f"entry {entry_index} does not exist")
        entry = block.entries[entry_index]
        if entry.concept_id != v:
            raise DomainError(f"entry {entry_index} does not belong to concept {v}")
    before = decoder.decode_slot(z[slot])
    swapped = z[slot].copy()
    swapped[j] = entry.vec
    after = decoder.decode_slot(swapped)
    changed = [k for k in before if before[k] != after[k]]
    mapped_blocks = set(decoder.encoder.config.factor_to_block.values())
    return InterventionResult(
        before=before,
        after=after,
        changed=changed,
        no_visible_effect=j not in mapped_blocks,
    )


def similarity_inspect(corpus: RetrievalCorpus, j: int, v: int) -> SimilarityReport:
    """Live concepts of block j ranked by prototype distance to (j, v)."""
    block = _require_present(corpus, j, v)
    if v == SENTINEL:
        raise DomainError("the sentinel has no similarity ranking")
    _l, anchor = block.prototype_of(v)
    ranked = []
    for other in block.live_concepts():
        if other == v:
            continue
        _l2, proto = block.prototype_of(other)
        ranked.append((other, float(np.linalg.norm(anchor.vec - proto.vec))))
    ranked.sort(key=lambda t: (t[1], t[0]))
    return SimilarityReport(block=j, anchor=v, ranked=ranked)
