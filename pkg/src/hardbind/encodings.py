"""Synthetic block-slot encodings with ground-truth factors.

A scene is encoded as a tensor z of shape (n_slots, n_blocks, block_dim)
plus one attention scalar per slot. Each object occupies one slot; each
object factor (shape, color, ...) lives in its own block as a Gaussian
cluster around a per-value centroid. Position is embedded linearly so a
continuous factor can later be discretized by corpus revision. The
generator stands in for a trained block-slot encoder: given the same
schema, config, objects and seed it reproduces scenes byte for byte.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ValidationError

ENCODING_FORMAT = "bsenc/1"

# Fixed generator geometry. Object slots always out-attend background
# slots, and position spans POSITION_SCALE units per unit of (x, y).
ATTENTION_OBJECT = (0.8, 1.0)
ATTENTION_BACKGROUND = (0.0, 0.2)
POSITION_SCALE = 4.0
DISTRACTOR_SPREAD = 0.25
BACKGROUND_SPREAD = 1.0
CENTROID_GAP_FACTOR = 10.0


@dataclass(frozen=True)
class Category:
    """One factor of variation. `values` empty means continuous (position)."""

    name: str
    values: tuple[str, ...] = ()

    @property
    def continuous(self) -> bool:
        return not self.values


@dataclass(frozen=True)
class FactorSchema:
    categories: tuple[Category, ...]

    def __post_init__(self):
        names = [c.name for c in self.categories]
        if not names:
            raise ValidationError("schema needs at least one category")
        if len(set(names)) != len(names):
            raise ValidationError("category names must be unique")

    @property
    def categorical(self) -> tuple[Category, ...]:
        return tuple(c for c in self.categories if not c.continuous)

    def category(self, name: str) -> Category:
        for c in self.categories:
            if c.name == name:
                return c
        raise ValidationError(f"unknown category {name!r}")

    def to_dict(self) -> dict:
        return {
            "categories": [
                {"name": c.name, "values": list(c.values)} for c in self.categories
            ]
        }

    @staticmethod
    def from_dict(d: dict) -> "FactorSchema":
        try:
            cats = tuple(
                Category(c["name"], tuple(c["values"])) for c in d["categories"]
            )
        except (KeyError, TypeError) as exc:
            raise FormatError(f"malformed schema: {exc}") from exc
        return FactorSchema(cats)


SHAPES = ("cube", "sphere", "cylinder")
COLORS = ("gray", "red", "blue", "green", "brown", "purple", "cyan", "yellow")
SIZES = ("large", "small")
MATERIALS = ("rubber", "metal")


def clevr_schema() -> FactorSchema:
    """shape(3) / color(8) / size(2) / material(2) plus continuous position."""
    return FactorSchema(
        (
            Category("shape", SHAPES),
            Category("color", COLORS),
            Category("size", SIZES),
            Category("material", MATERIALS),
            Category("position"),
        )
    )


def clevr_easy_schema() -> FactorSchema:
    """shape(3) / color(8) plus position; size and material are fixed."""
    return FactorSchema(
        (
            Category("shape", SHAPES),
            Category("color", COLORS),
            Category("position"),
        )
    )


@dataclass(frozen=True)
class GroundTruthObject:
    """Assignment of one value per schema category."""

    factor_values: dict

    def validate(self, schema: FactorSchema) -> None:
        for cat in schema.categories:
            if cat.name not in self.factor_values:
                raise ValidationError(f"object missing category {cat.name!r}")
            val = self.factor_values[cat.name]
            if cat.continuous:
                x, y = val
                if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                    raise ValidationError("position components must lie in [0,1]")
            elif val not in cat.values:
                raise ValidationError(f"{val!r} is not a value of {cat.name!r}")
        extra = set(self.factor_values) - {c.name for c in schema.categories}
        if extra:
            raise ValidationError(f"unknown categories {sorted(extra)}")


@dataclass(frozen=True)
class EncoderConfig:
    n_slots: int
    n_blocks: int
    block_dim: int
    factor_to_block: dict
    cluster_spread: float = 0.05
    duplicate_clusters_per_value: int = 1
    seed: int = 0

    def __post_init__(self):
        if min(self.n_slots, self.n_blocks, self.block_dim) < 1:
            raise ValidationError("n_slots, n_blocks and block_dim must be positive")
        blocks = list(self.factor_to_block.values())
        if len(set(blocks)) != len(blocks):
            raise ValidationError("factor_to_block must be injective")
        if any(not (0 <= b < self.n_blocks) for b in blocks):
            raise ValidationError("mapped block index out of range")
        if self.cluster_spread < 0:
            raise ValidationError("cluster_spread must be nonnegative")
        if self.duplicate_clusters_per_value < 1:
            raise ValidationError("duplicate_clusters_per_value must be >= 1")

    def to_dict(self) -> dict:
        return {
            "n_slots": self.n_slots,
            "n_blocks": self.n_blocks,
            "block_dim": self.block_dim,
            "factor_to_block": dict(self.factor_to_block),
            "cluster_spread": self.cluster_spread,
            "duplicate_clusters_per_value": self.duplicate_clusters_per_value,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "EncoderConfig":
        return EncoderConfig(
            n_slots=d["n_slots"],
            n_blocks=d["n_blocks"],
            block_dim=d["block_dim"],
            factor_to_block={k: int(v) for k, v in d["factor_to_block"].items()},
            cluster_spread=d["cluster_spread"],
            duplicate_clusters_per_value=d["duplicate_clusters_per_value"],
            seed=d["seed"],
        )


def default_config(
    schema: FactorSchema,
    n_slots: int = 4,
    block_dim: int = 128,
    cluster_spread: float = 0.05,
    duplicate_clusters_per_value: int = 1,
    seed: int = 0,
    n_blocks: int | None = None,
) -> EncoderConfig:
    """CLEVR-style defaults: 16 blocks for the 4-category schema, 8 for the
    2-category one; categories mapped to the leading blocks in order."""
    if n_blocks is None:
        n_blocks = 16 if len(schema.categorical) >= 3 else 8
    mapping = {c.name: i for i, c in enumerate(schema.categories)}
    return EncoderConfig(
        n_slots=n_slots,
        n_blocks=n_blocks,
        block_dim=block_dim,
        factor_to_block=mapping,
        cluster_spread=cluster_spread,
        duplicate_clusters_per_value=duplicate_clusters_per_value,
        seed=seed,
    )


@dataclass
class BlockSlotEncoding:
    z: np.ndarray  # (n_slots, n_blocks, block_dim) float32
    attention: np.ndarray  # (n_slots,) float32, values in [0, 1]

    def validate(self) -> None:
        if self.z.ndim != 3:
            raise ValidationError("z must have shape (n_slots, n_blocks, block_dim)")
        if self.attention.shape != (self.z.shape[0],):
            raise ValidationError("attention length must equal n_slots")
        if not np.all(np.isfinite(self.z)):
            raise ValidationError("z contains non-finite entries")
        if np.any(self.attention < 0) or np.any(self.attention > 1):
            raise ValidationError("attention values must lie in [0, 1]")


@dataclass
class LabeledScene:
    encoding: BlockSlotEncoding
    objects: list  # list[GroundTruthObject]
    object_slot_ids: list  # list[int], aligned with objects

    def validate(self) -> None:
        self.encoding.validate()
        if len(self.objects) != len(self.object_slot_ids):
            raise ValidationError("objects and object_slot_ids must align")
        if len(set(self.object_slot_ids)) != len(self.object_slot_ids):
            raise ValidationError("object slot ids must be distinct")
        if any(not (0 <= s < self.encoding.z.shape[0]) for s in self.object_slot_ids):
            raise ValidationError("object slot id out of range")


class SyntheticEncoder:
    """Ground-truth-factored scene encoder.

    Centroids are drawn once at construction from the config seed; every
    categorical value owns `duplicate_clusters_per_value` centroids with
    pairwise distance at least 10x the cluster spread within their block.
    """

    def __init__(self, schema: FactorSchema, config: EncoderConfig):
        for name in config.factor_to_block:
            schema.category(name)  # raises on unknown names
        self.schema = schema
        self.config = config
        rng = np.random.default_rng(config.seed)
        d = config.block_dim
        gap = CENTROID_GAP_FACTOR * config.cluster_spread

        # centroids[(category, value)] -> (dups, d)
        self.centroids: dict = {}
        self.position_basis: dict = {}  # block -> (2, d), rows u and v
        per_block: dict = {b: [] for b in range(config.n_blocks)}
        for cat in schema.categories:
            block = config.factor_to_block.get(cat.name)
            if block is None:
                continue
            if cat.continuous:
                basis = rng.normal(size=(2, d))
                basis[0] /= np.linalg.norm(basis[0])
                basis[1] -= basis[0] * (basis[0] @ basis[1])
                basis[1] /= np.linalg.norm(basis[1])
                self.position_basis[block] = basis * POSITION_SCALE
                continue
            # Duplicate centroids of one value sit a short controlled hop
            # from the value's base centroid: far enough apart to cluster
            # separately, far closer to each other than to other values.
            dup_spacing = max(2.0 * gap, 0.5)
            for value in cat.values:
                rows = []
                for dup in range(config.duplicate_clusters_per_value):
                    for attempt in range(1000):
                        if dup == 0:
                            c = rng.normal(size=d)
                        else:
                            step = rng.normal(size=d)
                            step *= dup_spacing / np.linalg.norm(step)
                            c = rows[0] + step
                        others = per_block[block]
                        if not others or min(
                            float(np.linalg.norm(c - o)) for o in others
                        ) >= gap:
                            break
                    else:
                        raise ValidationError(
                            f"cannot place centroids {gap:.3g} apart in block {block}"
                        )
                    per_block[block].append(c)
                    rows.append(c)
                self.centroids[(cat.name, value)] = np.stack(rows)

        # Unmapped blocks share one blob per block; background slots draw
        # from a separate wide distribution in every block.
        mapped = set(config.factor_to_block.values())
        self.distractor_center = {
            b: rng.normal(size=d) for b in range(config.n_blocks) if b not in mapped
        }
        self.background_center = rng.normal(size=(config.n_blocks, d)) * 2.0

    def centroid(self, category: str, value: str, duplicate: int = 0) -> np.ndarray:
        return self.centroids[(category, value)][duplicate]


def build_synthetic_encoder(schema: FactorSchema, config: EncoderConfig) -> SyntheticEncoder:
    return SyntheticEncoder(schema, config)


def encode_scene(
    encoder: SyntheticEncoder, objects: list, seed
) -> LabeledScene:
    """Encode ground-truth objects into one scene. Pure given the seed."""
    cfg = encoder.config
    if len(objects) > cfg.n_slots:
        raise ValidationError(
            f"{len(objects)} objects do not fit into {cfg.n_slots} slots"
        )
    for obj in objects:
        obj.validate(encoder.schema)
    rng = np.random.default_rng(seed)
    sigma = cfg.cluster_spread

    slot_ids = [int(s) for s in rng.choice(cfg.n_slots, size=len(objects), replace=False)]
    attention = rng.uniform(*ATTENTION_BACKGROUND, size=cfg.n_slots)
    z = np.empty((cfg.n_slots, cfg.n_blocks, cfg.block_dim))
    for b in range(cfg.n_blocks):
        z[:, b, :] = encoder.background_center[b] + rng.normal(
            size=(cfg.n_slots, cfg.block_dim)
        ) * BACKGROUND_SPREAD

    for obj, slot in zip(objects, slot_ids):
        attention[slot] = rng.uniform(*ATTENTION_OBJECT)
        for b in range(cfg.n_blocks):
            noise = rng.normal(size=cfg.block_dim)
            if b in encoder.position_basis:
                cat = _category_for_block(encoder, b)
                x, y = obj.factor_values[cat]
                base = x * encoder.position_basis[b][0] + y * encoder.position_basis[b][1]
                z[slot, b, :] = base + sigma * noise
            elif b in encoder.distractor_center:
                z[slot, b, :] = encoder.distractor_center[b] + DISTRACTOR_SPREAD * noise
            else:
                cat = _category_for_block(encoder, b)
                value = obj.factor_values[cat]
                dups = encoder.centroids[(cat, value)]
                pick = int(rng.integers(len(dups)))
                z[slot, b, :] = dups[pick] + sigma * noise

    scene = LabeledScene(
        encoding=BlockSlotEncoding(
            z=z.astype(np.float32), attention=attention.astype(np.float32)
        ),
        objects=list(objects),
        object_slot_ids=slot_ids,
    )
    scene.validate()
    return scene


def _category_for_block(encoder: SyntheticEncoder, block: int) -> str:
    for name, b in encoder.config.factor_to_block.items():
        if b == block:
            return name
    raise KeyError(block)


def sample_object(schema: FactorSchema, rng: np.random.Generator) -> GroundTruthObject:
    values = {}
    for cat in schema.categories:
        if cat.continuous:
            values[cat.name] = (float(rng.uniform()), float(rng.uniform()))
        else:
            values[cat.name] = cat.values[int(rng.integers(len(cat.values)))]
    return GroundTruthObject(values)


def generate_scenes(
    encoder: SyntheticEncoder,
    n_scenes: int,
    seed: int,
    objects_per_scene: int = 1,
) -> list:
    """Sample ground-truth objects and encode them into scenes."""
    rng = np.random.default_rng(seed)
    scenes = []
    for _ in range(n_scenes):
        objs = [sample_object(encoder.schema, rng) for _ in range(objects_per_scene)]
        scene_seed = int(rng.integers(0, 2**63 - 1))
        scenes.append(encode_scene(encoder, objs, scene_seed))
    return scenes


def select_object_slots(
    encoding: BlockSlotEncoding, mode: str = "max_one", threshold: float | None = None
) -> list:
    """Pick slots that contain objects from per-slot attention.

    max_one returns the single argmax slot (lowest index on ties);
    threshold returns every slot with attention >= threshold, ascending.
    """
    att = np.asarray(encoding.attention)
    if att.size < 1:
        raise ValidationError("encoding has no slots")
    if mode == "max_one":
        return [int(np.argmax(att))]
    if mode == "threshold":
        if threshold is None or not (0.0 < threshold <= 1.0):
            raise ValidationError("threshold mode needs a threshold in (0, 1]")
        return [int(i) for i in np.nonzero(att >= threshold)[0]]
    raise ValidationError(f"unknown slot selection mode {mode!r}")


class SyntheticDecoder:
    """Reads ground-truth factors back off block vectors.

    Categorical blocks decode to the nearest value centroid; position
    blocks invert the linear embedding by least squares. Distractor
    blocks carry no factor and decode to nothing.
    """

    def __init__(self, encoder: SyntheticEncoder):
        self.encoder = encoder

    def decode_slot(self, z_slot: np.ndarray) -> dict:
        cfg = self.encoder.config
        if z_slot.shape != (cfg.n_blocks, cfg.block_dim):
            raise ValidationError("slot tensor shape mismatch")
        factors = {}
        for cat in self.encoder.schema.categories:
            block = cfg.factor_to_block.get(cat.name)
            if block is None:
                continue
            vec = np.asarray(z_slot[block], dtype=np.float64)
            if cat.continuous:
                basis = self.encoder.position_basis[block]
                coords, *_ = np.linalg.lstsq(basis.T, vec, rcond=None)
                factors[cat.name] = (float(coords[0]), float(coords[1]))
            else:
                best, best_d = None, np.inf
                for value in cat.values:
                    for c in self.encoder.centroids[(cat.name, value)]:
                        dist = float(np.linalg.norm(vec - c))
                        if dist < best_d:
                            best, best_d = value, dist
                factors[cat.name] = best
        return factors


def _labels_path(path: str) -> str:
    return str(path) + ".labels.jsonl"


def write_encodings(path, scenes: list, schema: FactorSchema) -> None:
    """Binary scene file plus a sibling ground-truth label file.

    Layout: one JSON header line, then per scene the z tensor followed by
    the attention vector, all little-endian float32.
    """
    if not scenes:
        raise ValidationError("refusing to write an empty scene file")
    n_slots, n_blocks, block_dim = scenes[0].encoding.z.shape
    header = {
        "format": ENCODING_FORMAT,
        "n_slots": n_slots,
        "n_blocks": n_blocks,
        "block_dim": block_dim,
        "count": len(scenes),
        "schema": schema.to_dict(),
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("utf-8"))
        for i, scene in enumerate(scenes):
            scene.validate()
            if scene.encoding.z.shape != (n_slots, n_blocks, block_dim):
                raise ValidationError(f"scene {i} has mismatched dimensions")
            fh.write(scene.encoding.z.astype("<f4").tobytes())
            fh.write(scene.encoding.attention.astype("<f4").tobytes())
    with open(_labels_path(path), "w", encoding="utf-8") as fh:
        for i, scene in enumerate(scenes):
            for obj, slot in zip(scene.objects, scene.object_slot_ids):
                rec = {"scene": i, "slot": slot, "factors": _factors_json(obj)}
                fh.write(json.dumps(rec) + "\n")


def _factors_json(obj: GroundTruthObject) -> dict:
    return {
        k: list(v) if isinstance(v, tuple) else v for k, v in obj.factor_values.items()
    }


def _factors_from_json(d: dict) -> GroundTruthObject:
    return GroundTruthObject(
        {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
    )


def read_encodings(path) -> tuple[list, FactorSchema]:
    """Inverse of write_encodings; validates dimensions and finiteness."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"malformed encoding header: {exc}") from exc
        if header.get("format") != ENCODING_FORMAT:
            raise FormatError(f"unsupported encoding format {header.get('format')!r}")
        try:
            n_slots = int(header["n_slots"])
            n_blocks = int(header["n_blocks"])
            block_dim = int(header["block_dim"])
            count = int(header["count"])
            schema = FactorSchema.from_dict(header["schema"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed encoding header: {exc}") from exc
        scene_floats = n_slots * n_blocks * block_dim + n_slots
        payload = fh.read()
    expected = count * scene_floats * 4
    if len(payload) != expected:
        raise FormatError(
            f"truncated or oversized payload: expected {expected} bytes after "
            f"header, found {len(payload)} (offset {len(header_line) + len(payload)})"
        )
    raw = np.frombuffer(payload, dtype="<f4").reshape(count, scene_floats)
    if not np.all(np.isfinite(raw)):
        raise FormatError("payload contains non-finite values")

    labels: dict = {}
    labels_file = _labels_path(path)
    if os.path.exists(labels_file):
        with open(labels_file, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    labels.setdefault(int(rec["scene"]), []).append(
                        (int(rec["slot"]), _factors_from_json(rec["factors"]))
                    )
                except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                    raise FormatError(
                        f"malformed label record on line {line_no + 1}: {exc}"
                    ) from exc

    scenes = []
    for i in range(count):
        row = raw[i]
        z = row[: n_slots * n_blocks * block_dim].reshape(n_slots, n_blocks, block_dim)
        attention = row[n_slots * n_blocks * block_dim :]
        pairs = labels.get(i, [])
        scenes.append(
            LabeledScene(
                encoding=BlockSlotEncoding(z=z.copy(), attention=attention.copy()),
                objects=[obj for _, obj in pairs],
                object_slot_ids=[slot for slot, _ in pairs],
            )
        )
        scenes[-1].validate()
    return scenes, schema
