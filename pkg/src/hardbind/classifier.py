"""Multi-hot concept vectors and a CART decision tree over them.

The multi-hot layout concatenates one coordinate per concept id present
in each block (sentinel included); blocks collapsed by deletion
contribute nothing, and zero_concept masks force their coordinate to 0.
The tree is plain CART with gini impurity, no depth cap, exhaustive
best-split; a seed only permutes the order in which equal-gain splits
are preferred, which is how the multi-seed evaluation protocol gets its
variation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .corpus import ConceptSlot, RetrievalCorpus, infer
from .errors import DomainError, ValidationError

_GAIN_EPS = 1e-12


class MultihotIndex:
    """Maps (block, concept id) to a coordinate for one corpus version."""

    def __init__(self, corpus: RetrievalCorpus):
        self.corpus_version = corpus.version
        self.coords: list = []
        self.masked_coords: set = set()
        pos = {}
        for j, block in enumerate(corpus.blocks):
            if block.deleted_to_single:
                continue
            for v in block.present_concepts():
                pos[(j, v)] = len(self.coords)
                if v in block.masked:
                    self.masked_coords.add(len(self.coords))
                self.coords.append((j, v))
        self._pos = pos
        self.skipped_blocks = {
            j for j, b in enumerate(corpus.blocks) if b.deleted_to_single
        }

    @property
    def dim(self) -> int:
        return len(self.coords)

    def coordinate(self, j: int, v: int) -> int:
        try:
            return self._pos[(j, v)]
        except KeyError:
            raise DomainError(
                f"concept {v} of block {j} is unknown to this corpus version "
                f"({self.corpus_version}); the encoding is stale"
            ) from None

    def transform(self, concept_ids) -> np.ndarray:
        """One-hot per block, concatenated; masked coordinates zeroed."""
        if isinstance(concept_ids, ConceptSlot):
            concept_ids = concept_ids.concept_ids
        out = np.zeros(self.dim, dtype=np.uint8)
        for j, v in enumerate(concept_ids):
            if j in self.skipped_blocks:
                continue
            c = self.coordinate(j, int(v))
            if c not in self.masked_coords:
                out[c] = 1
        return out

    def transform_many(self, rows) -> np.ndarray:
        if not rows:
            return np.zeros((0, self.dim), dtype=np.uint8)
        return np.stack([self.transform(r) for r in rows])


def to_multihot(concept_slot, corpus: RetrievalCorpus) -> np.ndarray:
    return MultihotIndex(corpus).transform(concept_slot)


# ---------------------------------------------------------------------------
# CART over binary features
# ---------------------------------------------------------------------------


@dataclass
class _Node:
    feature: int = -1  # -1 marks a leaf
    left: "_Node | None" = None
    right: "_Node | None" = None
    prediction: int = 0  # class index
    counts: np.ndarray | None = None


class DecisionTree:
    def __init__(self, root: _Node, classes: list):
        self.root = root
        self.classes = classes

    def predict(self, x) -> object:
        x = np.asarray(x)
        node = self.root
        while node.feature >= 0:
            node = node.right if x[node.feature] else node.left
        return self.classes[node.prediction]

    def predict_many(self, X) -> list:
        return [self.predict(row) for row in np.asarray(X)]

    def depth(self) -> int:
        def rec(node):
            if node.feature < 0:
                return 0
            return 1 + max(rec(node.left), rec(node.right))

        return rec(self.root)

    def used_features(self) -> set:
        out = set()

        def rec(node):
            if node.feature >= 0:
                out.add(node.feature)
                rec(node.left)
                rec(node.right)

        rec(self.root)
        return out

    def to_json(self) -> str:
        def enc(node):
            if node.feature < 0:
                return {"leaf": node.prediction, "counts": node.counts.tolist()}
            return {
                "feature": node.feature,
                "left": enc(node.left),
                "right": enc(node.right),
            }

        return json.dumps({"classes": list(self.classes), "root": enc(self.root)})

    @staticmethod
    def from_json(text: str) -> "DecisionTree":
        doc = json.loads(text)

        def dec(d):
            if "leaf" in d:
                return _Node(
                    prediction=int(d["leaf"]), counts=np.array(d["counts"])
                )
            return _Node(
                feature=int(d["feature"]), left=dec(d["left"]), right=dec(d["right"])
            )

        return DecisionTree(dec(doc["root"]), doc["classes"])


def fit_tree(X, y, seed=None) -> DecisionTree:
    """CART with gini impurity and binary features.

    Splits until pure or no splittable feature remains; zero-gain splits
    are taken on impure nodes so conflict-free training data is always
    fitted exactly. Equal-gain ties go to the feature appearing earliest
    in the (seeded) permutation, identity by default, hence the lowest
    coordinate. Leaf ties predict the smaller class label.
    """
    X = np.asarray(X, dtype=np.uint8)
    y = [v.item() if isinstance(v, np.generic) else v for v in y]
    if X.ndim != 2 or len(y) != X.shape[0]:
        raise ValidationError("X must be 2d and aligned with y")
    if len(y) == 0:
        raise ValidationError("cannot fit a tree on an empty training set")
    classes = sorted(set(y))
    class_of = {c: i for i, c in enumerate(classes)}
    yi = np.array([class_of[v] for v in y], dtype=np.int64)
    n_features = X.shape[1]
    if seed is None:
        perm = np.arange(n_features)
    else:
        perm = np.random.default_rng(seed).permutation(n_features)

    onehot = np.zeros((len(yi), len(classes)), dtype=np.float64)
    onehot[np.arange(len(yi)), yi] = 1.0

    def build(idx) -> _Node:
        counts = onehot[idx].sum(axis=0)
        n = len(idx)
        leaf = _Node(prediction=int(np.argmax(counts)), counts=counts)
        if counts.max() == n or n < 2:
            return leaf
        gini_parent = 1.0 - float(np.sum((counts / n) ** 2))
        sub = X[idx].astype(np.float64)
        c1 = sub.T @ onehot[idx]  # per feature, class counts on the 1 side
        c0 = counts[None, :] - c1
        n1 = c1.sum(axis=1)
        n0 = n - n1
        with np.errstate(divide="ignore", invalid="ignore"):
            imp = np.where(n0 > 0, n0 - (c0**2).sum(axis=1) / n0, 0.0) + np.where(
                n1 > 0, n1 - (c1**2).sum(axis=1) / n1, 0.0
            )
        gains = gini_parent - imp / n
        gains[(n0 == 0) | (n1 == 0)] = -np.inf
        best = perm[int(np.argmax(gains[perm]))]
        if not np.isfinite(gains[best]):
            return leaf  # impure but unsplittable: conflicting duplicates
        mask = X[idx, best] == 1
        node = _Node(feature=int(best), counts=counts)
        node.left = build(idx[~mask])
        node.right = build(idx[mask])
        node.prediction = int(np.argmax(counts))
        return node

    return DecisionTree(build(np.arange(len(yi))), classes)


# ---------------------------------------------------------------------------
# Property classification protocol
# ---------------------------------------------------------------------------


def concept_dataset(
    corpus: RetrievalCorpus,
    scenes,
    slot_mode: str = "max_one",
    threshold: float | None = None,
    top_k: int = 1,
):
    """(multihot matrix, ground-truth factor dicts) over all object slots
    that have ground truth attached."""
    index = MultihotIndex(corpus)
    rows, factors = [], []
    for scene in scenes:
        slot_factors = {
            slot: obj.factor_values
            for obj, slot in zip(scene.objects, scene.object_slot_ids)
        }
        for cs in infer(
            corpus, scene.encoding, slot_mode=slot_mode, threshold=threshold, top_k=top_k
        ):
            if cs.slot_id not in slot_factors:
                continue
            rows.append(index.transform(cs))
            factors.append(slot_factors[cs.slot_id])
    X = np.stack(rows) if rows else np.zeros((0, index.dim), dtype=np.uint8)
    return X, factors


def evaluate_property_accuracy(
    corpus: RetrievalCorpus,
    train_scenes,
    test_scenes,
    schema,
    n_train: int,
    tree_seed=None,
    slot_mode: str = "max_one",
    top_k: int = 1,
) -> dict:
    """One tree per categorical property, trained on the first n_train
    objects, scored on the held-out scenes; returns per-category and
    mean accuracy."""
    X_train, f_train = concept_dataset(corpus, train_scenes, slot_mode, top_k=top_k)
    X_test, f_test = concept_dataset(corpus, test_scenes, slot_mode, top_k=top_k)
    if n_train < 1 or n_train > len(X_train):
        raise ValidationError(f"n_train={n_train} unavailable ({len(X_train)} objects)")
    out = {}
    accs = []
    for cat in schema.categorical:
        if any(cat.name not in f for f in f_train + f_test):
            raise DomainError(f"category {cat.name!r} missing from ground truth")
        tree = fit_tree(
            X_train[:n_train], [f[cat.name] for f in f_train[:n_train]], seed=tree_seed
        )
        pred = tree.predict_many(X_test)
        truth = [f[cat.name] for f in f_test]
        acc = float(np.mean([p == t for p, t in zip(pred, truth)])) if truth else 0.0
        out[cat.name] = acc
        accs.append(acc)
    out["mean"] = float(np.mean(accs)) if accs else 0.0
    return out
