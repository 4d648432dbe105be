"""The retrieval corpus and retrieval-based concept inference.

Per block the corpus stores (vector, concept id, kind) entries distilled
from a clustering: one prototype (cluster mean) plus up to k exemplars
(members nearest the prototype) per concept. Inference maps a continuous
block vector to the concept id of its nearest entry, either argmin or by
top-k majority vote. Entry index l is identity: deletions tombstone,
they never shift later indices. Concept id 0 is reserved corpus-wide for
the "other/uninformative" sentinel produced by concept deletion.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .clustering import (
    DEFAULT_GRID,
    NOISE,
    ClusterParams,
    fit_hdbscan,
    fit_kmeans,
    grid_search,
)
from .encodings import BlockSlotEncoding, select_object_slots
from .errors import DomainError, FormatError, ValidationError

CORPUS_FORMAT = "corpus/1"
SENTINEL = 0  # reserved "other/uninformative" concept id
PROTOTYPE = "prototype"
EXEMPLAR = "exemplar"


@dataclass(frozen=True)
class CorpusEntry:
    vec: np.ndarray  # (block_dim,) float64, never mutated in place
    concept_id: int
    kind: str

    def __post_init__(self):
        if self.kind not in (PROTOTYPE, EXEMPLAR):
            raise ValidationError(f"unknown entry kind {self.kind!r}")
        if self.concept_id < 0:
            raise ValidationError("concept ids must be >= 0")
        if not np.all(np.isfinite(self.vec)):
            raise ValidationError("entry vector must be finite")


class BlockCorpus:
    """One block's entry list. `n_concepts` is the allocation high-water
    mark, so retired ids are never reused and fresh concepts always get
    id n_concepts + 1."""

    def __init__(
        self,
        block_dim: int,
        entries=None,
        n_concepts: int = 0,
        deleted_to_single: bool = False,
        masked=(),
    ):
        self.block_dim = block_dim
        self.entries: list = list(entries) if entries is not None else []
        self.n_concepts = n_concepts
        self.deleted_to_single = deleted_to_single
        self.masked = set(masked)
        self._matrix = None
        self._matrix_index = None

    def clone(self) -> "BlockCorpus":
        return BlockCorpus(
            self.block_dim,
            entries=list(self.entries),
            n_concepts=self.n_concepts,
            deleted_to_single=self.deleted_to_single,
            masked=set(self.masked),
        )

    def live_items(self):
        """(index, entry) pairs for non-tombstoned entries."""
        return [(l, e) for l, e in enumerate(self.entries) if e is not None]

    def live_concepts(self) -> list:
        """Concept ids >= 1 still present, ascending. Excludes the sentinel."""
        return sorted({e.concept_id for _, e in self.live_items() if e.concept_id >= 1})

    def present_concepts(self) -> list:
        """All concept ids present, sentinel included."""
        return sorted({e.concept_id for _, e in self.live_items()})

    def entries_of(self, concept_id: int):
        return [(l, e) for l, e in self.live_items() if e.concept_id == concept_id]

    def prototype_of(self, concept_id: int):
        for l, e in self.live_items():
            if e.concept_id == concept_id and e.kind == PROTOTYPE:
                return l, e
        raise DomainError(f"concept {concept_id} has no prototype")

    def append(self, entry: CorpusEntry) -> int:
        if entry.vec.shape != (self.block_dim,):
            raise ValidationError("entry vector dimension mismatch")
        self.entries.append(entry)
        self._matrix = None
        return len(self.entries) - 1

    def replace(self, index: int, entry) -> None:
        self.entries[index] = entry
        self._matrix = None

    def matrix(self):
        """(stacked live vectors, their indices), cached per snapshot."""
        if self._matrix is None:
            items = self.live_items()
            if items:
                self._matrix = np.stack([e.vec for _, e in items])
                self._matrix_index = np.array([l for l, _ in items], dtype=np.int64)
            else:
                self._matrix = np.empty((0, self.block_dim))
                self._matrix_index = np.empty(0, dtype=np.int64)
        return self._matrix, self._matrix_index

    def validate(self) -> None:
        for _, e in self.live_items():
            if e.vec.shape != (self.block_dim,):
                raise ValidationError("entry vector dimension mismatch")
            if e.concept_id > self.n_concepts:
                raise ValidationError(
                    f"concept id {e.concept_id} above high-water mark {self.n_concepts}"
                )
        for v in self.present_concepts():
            protos = [e for _, e in self.entries_of(v) if e.kind == PROTOTYPE]
            if len(protos) != 1:
                raise ValidationError(
                    f"concept {v} must have exactly one prototype, found {len(protos)}"
                )
        if not self.masked <= set(self.present_concepts()):
            raise ValidationError("masked ids must reference present concepts")


class RetrievalCorpus:
    def __init__(self, blocks, provenance=None, version: int = 1):
        self.blocks: list = list(blocks)
        self.provenance: dict = dict(provenance or {})
        self.version = version

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def block_dim(self) -> int:
        return self.blocks[0].block_dim

    def clone(self) -> "RetrievalCorpus":
        return RetrievalCorpus(
            [b.clone() for b in self.blocks],
            provenance=dict(self.provenance),
            version=self.version,
        )

    def validate(self) -> None:
        if not self.blocks:
            raise ValidationError("corpus needs at least one block")
        if len({b.block_dim for b in self.blocks}) != 1:
            raise ValidationError("blocks must share one dimension")
        for b in self.blocks:
            b.validate()

    def content_hash(self) -> str:
        return hashlib.sha256(dumps_corpus(self).encode("utf-8")).hexdigest()


def distill(
    clusterings,
    block_points,
    exemplars_per_cluster: int = 5,
    seed=None,
    provenance=None,
) -> RetrievalCorpus:
    """Extract per-cluster prototypes and exemplars into a fresh corpus.

    Noise points contribute nothing. A block whose clustering found no
    clusters is stored empty and flagged deleted_to_single so inference
    emits the sentinel there instead of failing.
    """
    if len(clusterings) != len(block_points):
        raise ValidationError("clusterings and block point sets must align")
    if exemplars_per_cluster < 0:
        raise ValidationError("exemplars_per_cluster must be >= 0")
    blocks = []
    for clustering, pts in zip(clusterings, block_points):
        pts = np.asarray(pts, dtype=np.float64)
        if len(clustering.labels) != len(pts):
            raise ValidationError("labels must align with points")
        block = BlockCorpus(pts.shape[1], n_concepts=clustering.n_clusters)
        if clustering.n_clusters == 0:
            block.deleted_to_single = True
            blocks.append(block)
            continue
        for v in range(1, clustering.n_clusters + 1):
            members = np.nonzero(clustering.labels == v)[0]
            if len(members) == 0:
                raise ValidationError(f"cluster {v} has no members")
            proto = pts[members].mean(axis=0)
            block.append(CorpusEntry(proto, v, PROTOTYPE))
            dists = np.linalg.norm(pts[members] - proto, axis=1)
            order = sorted(range(len(members)), key=lambda i: (dists[i], members[i]))
            for i in order[:exemplars_per_cluster]:
                block.append(CorpusEntry(pts[members[i]].copy(), v, EXEMPLAR))
        blocks.append(block)
    prov = dict(provenance or {})
    if seed is not None:
        prov.setdefault("distill_seed", seed)
    prov.setdefault("exemplars_per_cluster", exemplars_per_cluster)
    corpus = RetrievalCorpus(blocks, provenance=prov, version=1)
    corpus.validate()
    return corpus


def select_concept(block: BlockCorpus, z_block) -> tuple:
    """(concept id, entry index) of the Euclidean-nearest corpus entry;
    exact distance ties resolve to the lowest entry index."""
    mat, index = block.matrix()
    if len(mat) == 0:
        raise DomainError("cannot select from an empty corpus block")
    q = np.asarray(z_block, dtype=np.float64)
    if q.shape != (block.block_dim,):
        raise ValidationError("query vector dimension mismatch")
    dists = np.linalg.norm(mat - q, axis=1)
    pos = int(np.argmin(dists))  # argmin keeps the first of equal values
    return int(block.entries[index[pos]].concept_id), int(index[pos])


def select_concept_topk(block: BlockCorpus, z_block, k: int) -> tuple:
    """(majority concept id among the k nearest entries, its frequency).

    Ties in the vote go to the smaller concept id. When the block holds
    fewer than k entries the vote is over what exists.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    mat, index = block.matrix()
    if len(mat) == 0:
        raise DomainError("cannot select from an empty corpus block")
    q = np.asarray(z_block, dtype=np.float64)
    if q.shape != (block.block_dim,):
        raise ValidationError("query vector dimension mismatch")
    dists = np.linalg.norm(mat - q, axis=1)
    k_eff = min(k, len(mat))
    order = sorted(range(len(mat)), key=lambda i: (dists[i], index[i]))[:k_eff]
    votes = Counter(int(block.entries[index[i]].concept_id) for i in order)
    top = max(votes.items(), key=lambda kv: (kv[1], -kv[0]))
    return top[0], top[1] / k_eff


@dataclass
class ConceptSlot:
    """Discrete concept ids for one selected slot, one id per block."""

    slot_id: int
    concept_ids: list
    probabilities: list | None = None


def infer(
    corpus: RetrievalCorpus,
    encoding: BlockSlotEncoding,
    slot_mode: str = "max_one",
    threshold: float | None = None,
    top_k: int = 1,
) -> list:
    """Concept-slot encodings for the object slots of one scene."""
    z = np.asarray(encoding.z)
    if z.ndim != 3 or z.shape[1] != corpus.n_blocks or z.shape[2] != corpus.block_dim:
        raise ValidationError(
            f"encoding dims {z.shape[1:]} do not match corpus "
            f"({corpus.n_blocks}, {corpus.block_dim})"
        )
    out = []
    for slot in select_object_slots(encoding, mode=slot_mode, threshold=threshold):
        ids, probs = [], []
        for j, block in enumerate(corpus.blocks):
            if block.deleted_to_single:
                ids.append(SENTINEL)
                probs.append(1.0)
            elif top_k == 1:
                v, _l = select_concept(block, z[slot, j])
                ids.append(v)
                probs.append(1.0)
            else:
                v, p = select_concept_topk(block, z[slot, j], top_k)
                ids.append(v)
                probs.append(p)
        out.append(
            ConceptSlot(
                slot_id=slot,
                concept_ids=ids,
                probabilities=probs if top_k > 1 else None,
            )
        )
    return out


def gather_block_points(scenes, slot_mode: str = "max_one", threshold=None):
    """Stack object-slot block vectors across scenes: one (n, block_dim)
    array per block plus (scene, slot) origins."""
    if not scenes:
        raise ValidationError("no scenes given")
    n_blocks = scenes[0].encoding.z.shape[1]
    per_block = [[] for _ in range(n_blocks)]
    origins = []
    for idx, scene in enumerate(scenes):
        for slot in select_object_slots(scene.encoding, slot_mode, threshold):
            origins.append((idx, slot))
            for j in range(n_blocks):
                per_block[j].append(np.asarray(scene.encoding.z[slot, j], dtype=np.float64))
    return [np.stack(v) if v else np.empty((0, scenes[0].encoding.z.shape[2])) for v in per_block], origins


def fit_corpus(
    scenes,
    slot_mode: str = "max_one",
    threshold: float | None = None,
    cluster: str = "hdbscan",
    grid=DEFAULT_GRID,
    params: ClusterParams | None = None,
    kmeans_k: int | None = None,
    exemplars_per_cluster: int = 5,
    allow_single_cluster: bool = True,
    seed: int = 0,
    source_hash: str | None = None,
) -> tuple:
    """Fit per-block clusterings over the object slots of `scenes` and
    distill them into a corpus. Returns (corpus, per-block report).

    cluster='hdbscan' grid-searches unless explicit params are given;
    cluster='kmeans' is the rudimentary ablation and needs kmeans_k.
    """
    block_points, _origins = gather_block_points(scenes, slot_mode, threshold)
    clusterings, report = [], []
    for j, pts in enumerate(block_points):
        row = {"block": j, "n_points": int(len(pts))}
        if cluster == "kmeans":
            if kmeans_k is None:
                raise ValidationError("kmeans clustering needs kmeans_k")
            clustering = fit_kmeans(pts, kmeans_k, seed + j)
            row.update(params={"k": kmeans_k}, dbcv=None)
        elif cluster == "hdbscan":
            if params is not None:
                best = params
                row.update(
                    params={
                        "min_cluster_size": best.min_cluster_size,
                        "min_samples": best.min_samples,
                    },
                    dbcv=None,
                )
            else:
                result = grid_search(pts, grid, allow_single_cluster=allow_single_cluster)
                best = result.best
                best_score = max(
                    (s for p, s in result.scored if p == best and s == s), default=None
                )
                row.update(
                    params={
                        "min_cluster_size": best.min_cluster_size,
                        "min_samples": best.min_samples,
                    },
                    dbcv=best_score,
                    degenerate=result.degenerate,
                )
            clustering = fit_hdbscan(pts, best)
        else:
            raise ValidationError(f"unknown clustering backend {cluster!r}")
        row["n_clusters"] = clustering.n_clusters
        row["n_noise"] = int(np.sum(clustering.labels == NOISE))
        clusterings.append(clustering)
        report.append(row)
    provenance = {
        "source_hash": source_hash,
        "slot_mode": slot_mode,
        "cluster": cluster,
        "seed": seed,
        "cluster_params": [r["params"] for r in report],
    }
    corpus = distill(
        clusterings,
        block_points,
        exemplars_per_cluster=exemplars_per_cluster,
        seed=seed,
        provenance=provenance,
    )
    return corpus, report


# ---------------------------------------------------------------------------
# Serialization: one JSON header line, then per block a JSON block-header
# line followed by entry lines "<index> <concept> <kind> <v0> <v1> ...".
# Decimal float repr round-trips float64 exactly.
# ---------------------------------------------------------------------------


def dumps_corpus(corpus: RetrievalCorpus) -> str:
    corpus.validate()
    lines = [
        json.dumps(
            {
                "format": CORPUS_FORMAT,
                "n_blocks": corpus.n_blocks,
                "block_dim": corpus.block_dim,
                "version": corpus.version,
                "provenance": corpus.provenance,
            },
            sort_keys=True,
        )
    ]
    for j, block in enumerate(corpus.blocks):
        lines.append(
            json.dumps(
                {
                    "block": j,
                    "n_concepts": block.n_concepts,
                    "deleted_to_single": block.deleted_to_single,
                    "masked": sorted(block.masked),
                },
                sort_keys=True,
            )
        )
        for l, e in block.live_items():
            vec = " ".join(repr(float(x)) for x in e.vec)
            lines.append(f"{l} {e.concept_id} {e.kind} {vec}")
    return "\n".join(lines) + "\n"


def save_corpus(path, corpus: RetrievalCorpus) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_corpus(corpus))


def loads_corpus(text: str) -> RetrievalCorpus:
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty corpus document")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"malformed corpus header: {exc}") from exc
    if header.get("format") != CORPUS_FORMAT:
        raise FormatError(f"unsupported corpus format {header.get('format')!r}")
    n_blocks = int(header["n_blocks"])
    block_dim = int(header["block_dim"])
    blocks: list = []
    current: BlockCorpus | None = None
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        if line.lstrip().startswith("{"):
            try:
                bh = json.loads(line)
                if bh["block"] != len(blocks):
                    raise FormatError(
                        f"line {line_no}: block {bh['block']} out of order"
                    )
                current = BlockCorpus(
                    block_dim,
                    n_concepts=int(bh["n_concepts"]),
                    deleted_to_single=bool(bh["deleted_to_single"]),
                    masked=[int(v) for v in bh["masked"]],
                )
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise FormatError(f"line {line_no}: malformed block header: {exc}") from exc
            blocks.append(current)
            continue
        if current is None:
            raise FormatError(f"line {line_no}: entry before any block header")
        parts = line.split()
        if len(parts) != 3 + block_dim:
            raise FormatError(
                f"line {line_no}: expected {3 + block_dim} fields, found {len(parts)}"
            )
        try:
            l, v, kind = int(parts[0]), int(parts[1]), parts[2]
            vec = np.array([float(x) for x in parts[3:]], dtype=np.float64)
        except ValueError as exc:
            raise FormatError(f"line {line_no}: malformed entry: {exc}") from exc
        while len(current.entries) < l:
            current.entries.append(None)  # tombstoned gap
        if len(current.entries) != l:
            raise FormatError(f"line {line_no}: entry index {l} out of order")
        current.append(CorpusEntry(vec, v, kind))
    if len(blocks) != n_blocks:
        raise FormatError(f"expected {n_blocks} blocks, found {len(blocks)}")
    corpus = RetrievalCorpus(
        blocks,
        provenance=header.get("provenance") or {},
        version=int(header["version"]),
    )
    try:
        corpus.validate()
    except ValidationError as exc:
        raise FormatError(f"corpus document violates invariants: {exc}") from exc
    return corpus


def load_corpus(path) -> RetrievalCorpus:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_corpus(fh.read())
