"""Sudoku puzzles whose digits are encoded objects.

Each sample carries a complete solution, K carved-out cells (carving
keeps the solution unique), a hidden digit -> attribute-combination map,
one synthesized object per given cell and N candidate example objects
per digit. The solver is constraint propagation (peer elimination plus
unique-place assignment) with minimum-remaining-values backtracking;
digit classification feeds it, so one misread cell is enough to lose a
puzzle. Scenes are materialized lazily from per-cell seeds: generating
thousands of samples costs little until encodings are actually read.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from itertools import product

import numpy as np

from .classifier import MultihotIndex, fit_tree
from .corpus import RetrievalCorpus, infer
from .encodings import (
    EncoderConfig,
    FactorSchema,
    GroundTruthObject,
    SyntheticEncoder,
    clevr_easy_schema,
    clevr_schema,
    encode_scene,
    read_encodings,
    write_encodings,
)
from .errors import DomainError, FormatError, ValidationError

ALL_DIGITS = 0x1FF  # bitmask, bit d-1 set = digit d possible

_UNITS: list = []
for r in range(9):
    _UNITS.append([9 * r + c for c in range(9)])
for c in range(9):
    _UNITS.append([9 * r + c for r in range(9)])
for br in range(0, 9, 3):
    for bc in range(0, 9, 3):
        _UNITS.append([9 * (br + dr) + (bc + dc) for dr in range(3) for dc in range(3)])
_UNITS_OF = [[u for u in _UNITS if c in u] for c in range(81)]
_PEERS = [sorted({cc for u in _UNITS_OF[c] for cc in u} - {c}) for c in range(81)]


def _bits(mask):
    while mask:
        b = mask & -mask
        yield b
        mask ^= b


def _assign(cand, cell, bit) -> bool:
    for other in _bits(cand[cell] & ~bit):
        if not _eliminate(cand, cell, other):
            return False
    return True


def _eliminate(cand, cell, bit) -> bool:
    if not cand[cell] & bit:
        return True
    cand[cell] &= ~bit
    if cand[cell] == 0:
        return False
    if cand[cell].bit_count() == 1:
        only = cand[cell]
        for p in _PEERS[cell]:
            if not _eliminate(cand, p, only):
                return False
    for unit in _UNITS_OF[cell]:
        places = [cc for cc in unit if cand[cc] & bit]
        if not places:
            return False
        if len(places) == 1 and cand[places[0]].bit_count() > 1:
            if not _assign(cand, places[0], bit):
                return False
    return True


def _grid_candidates(grid) -> list | None:
    cand = [ALL_DIGITS] * 81
    for cell in range(81):
        v = int(grid[cell // 9][cell % 9])
        if v and not _assign(cand, cell, 1 << (v - 1)):
            return None
    return cand


def _search(cand, out, limit):
    if len(out) >= limit:
        return
    best_cell, best_n = -1, 10
    for cell in range(81):
        n = cand[cell].bit_count()
        if 1 < n < best_n:
            best_cell, best_n = cell, n
    if best_cell < 0:
        out.append([c.bit_length() for c in cand])
        return
    for bit in _bits(cand[best_cell]):
        trial = cand.copy()
        if _assign(trial, best_cell, bit):
            _search(trial, out, limit)
        if len(out) >= limit:
            return


def solve_grid(grid):
    """First solution of a 9x9 grid (0 = empty) as a (9, 9) int array,
    or None when the search space is exhausted."""
    grid = np.asarray(grid, dtype=np.int64)
    if grid.shape != (9, 9) or grid.min() < 0 or grid.max() > 9:
        raise ValidationError("grid must be 9x9 with entries in 0..9")
    cand = _grid_candidates(grid)
    if cand is None:
        return None
    out: list = []
    _search(cand, out, limit=1)
    if not out:
        return None
    return np.array(out[0], dtype=np.int64).reshape(9, 9)


def count_solutions(grid, limit: int = 2) -> int:
    cand = _grid_candidates(np.asarray(grid, dtype=np.int64))
    if cand is None:
        return 0
    out: list = []
    _search(cand, out, limit=limit)
    return len(out)


def is_valid_solution(grid) -> bool:
    g = np.asarray(grid)
    if g.shape != (9, 9):
        return False
    return all(sorted(int(g[c // 9][c % 9]) for c in unit) == list(range(1, 10)) for unit in _UNITS)


def random_solution(rng: np.random.Generator) -> np.ndarray:
    """Complete valid grid via seeded backtracking with shuffled digits."""
    cand = [ALL_DIGITS] * 81

    def fill(cand):
        best_cell, best_n = -1, 10
        for cell in range(81):
            n = cand[cell].bit_count()
            if 1 < n < best_n:
                best_cell, best_n = cell, n
        if best_cell < 0:
            return cand
        digits = [b for b in _bits(cand[best_cell])]
        rng.shuffle(digits)
        for bit in digits:
            trial = cand.copy()
            if _assign(trial, best_cell, bit):
                done = fill(trial)
                if done is not None:
                    return done
        return None

    done = fill(cand)
    assert done is not None
    return np.array([c.bit_length() for c in done], dtype=np.int64).reshape(9, 9)


def carve_unique(solution: np.ndarray, k: int, rng: np.random.Generator):
    """Empty k cells while a 2-solution counter certifies uniqueness.
    Returns the given mask, or None when this ordering cannot reach k."""
    grid = solution.copy()
    removed = 0
    for cell in rng.permutation(81):
        if removed == k:
            break
        r, c = divmod(int(cell), 9)
        saved = grid[r][c]
        grid[r][c] = 0
        if count_solutions(grid, 2) == 1:
            removed += 1
        else:
            grid[r][c] = saved
    if removed < k:
        return None
    return grid != 0


def _variant_schema(variant: str) -> FactorSchema:
    if variant == "easy":
        return clevr_easy_schema()
    if variant == "full":
        return clevr_schema()
    raise ValidationError(f"unknown variant {variant!r}")


def _combo_categories(schema: FactorSchema):
    return [c for c in schema.categorical]


def sample_digit_map(schema: FactorSchema, rng: np.random.Generator) -> dict:
    """Nine distinct attribute combinations over the categorical factors."""
    cats = _combo_categories(schema)
    combos = list(product(*[c.values for c in cats]))
    if len(combos) < 9:
        raise DomainError("attribute space too small for 9 distinct digits")
    picks = rng.choice(len(combos), size=9, replace=False)
    return {
        d + 1: {cat.name: combos[int(i)][k] for k, cat in enumerate(cats)}
        for d, i in enumerate(picks)
    }


def _object_for(digit_map, digit, schema, rng) -> GroundTruthObject:
    values = dict(digit_map[digit])
    for cat in schema.categories:
        if cat.continuous:
            values[cat.name] = (float(rng.uniform()), float(rng.uniform()))
    return GroundTruthObject(values)


@dataclass
class SudokuSample:
    variant: str
    k_empty: int
    n_examples: int
    solution: np.ndarray  # (9, 9)
    given_mask: np.ndarray  # (9, 9) bool
    digit_map: dict  # digit -> {category: value}, hidden from pipelines
    cell_objects: dict  # (r, c) -> GroundTruthObject for given cells
    example_objects: dict  # digit -> [GroundTruthObject] * n_examples
    encoder: SyntheticEncoder
    scene_seed: int

    def given_cells(self) -> list:
        return [(r, c) for r in range(9) for c in range(9) if self.given_mask[r][c]]

    def grid_scene(self, r: int, c: int):
        if not self.given_mask[r][c]:
            raise DomainError(f"cell ({r}, {c}) is empty")
        seed = np.random.SeedSequence([self.scene_seed, 1, r * 9 + c])
        return encode_scene(self.encoder, [self.cell_objects[(r, c)]], seed)

    def example_scene(self, digit: int, i: int):
        seed = np.random.SeedSequence([self.scene_seed, 2, digit * 100 + i])
        return encode_scene(self.encoder, [self.example_objects[digit][i]], seed)

    def validate(self) -> None:
        if not is_valid_solution(self.solution):
            raise ValidationError("stored solution violates a unit constraint")
        if int(self.given_mask.sum()) != 81 - self.k_empty:
            raise ValidationError("given mask inconsistent with k_empty")
        combos = [tuple(sorted(v.items())) for v in self.digit_map.values()]
        if len(set(combos)) != 9:
            raise ValidationError("digit map must use 9 distinct combinations")
        schema = self.encoder.schema
        for (r, c), obj in self.cell_objects.items():
            obj.validate(schema)
            digit = int(self.solution[r][c])
            for cat, val in self.digit_map[digit].items():
                if obj.factor_values[cat] != val:
                    raise ValidationError(f"cell ({r},{c}) object contradicts its digit")
        for digit, objs in self.example_objects.items():
            if len(objs) != self.n_examples:
                raise ValidationError("wrong number of candidate examples")
            for obj in objs:
                for cat, val in self.digit_map[digit].items():
                    if obj.factor_values[cat] != val:
                        raise ValidationError(f"example of digit {digit} contradicts map")


def default_sudoku_encoder(
    variant: str,
    sigma: float = 0.05,
    duplicate_clusters_per_value: int = 1,
    block_dim: int = 32,
    seed: int = 7,
) -> SyntheticEncoder:
    """Desk-scale encoder for puzzle objects: 2 slots (one object plus
    background), narrow blocks; block count follows the variant schema."""
    schema = _variant_schema(variant)
    config = EncoderConfig(
        n_slots=2,
        n_blocks=16 if variant == "full" else 8,
        block_dim=block_dim,
        factor_to_block={c.name: i for i, c in enumerate(schema.categories)},
        cluster_spread=sigma,
        duplicate_clusters_per_value=duplicate_clusters_per_value,
        seed=seed,
    )
    return SyntheticEncoder(schema, config)


def generate_dataset(
    variant: str,
    k_empty: int,
    n_examples: int,
    count: int,
    seed: int,
    encoder: SyntheticEncoder | None = None,
) -> list:
    """`count` puzzles for one (variant, K, N) configuration.

    Every sample gets a fresh solution, a unique-solution carving, a
    fresh digit map and independently sampled objects; identical seeds
    reproduce the dataset byte for byte.
    """
    if k_empty not in (10, 30, 50):
        raise ValidationError("k_empty must be one of 10, 30, 50")
    if n_examples not in (1, 3, 5, 10):
        raise ValidationError("n_examples must be one of 1, 3, 5, 10")
    if count < 1:
        raise ValidationError("count must be >= 1")
    schema = _variant_schema(variant)
    if encoder is None:
        encoder = default_sudoku_encoder(variant)
    if encoder.schema.to_dict() != schema.to_dict():
        raise ValidationError("encoder schema does not match the variant")
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(count):
        solution = random_solution(rng)
        mask = carve_unique(solution, k_empty, rng)
        while mask is None:  # rare: this ordering ran out of removable cells
            solution = random_solution(rng)
            mask = carve_unique(solution, k_empty, rng)
        digit_map = sample_digit_map(schema, rng)
        cell_objects = {
            (r, c): _object_for(digit_map, int(solution[r][c]), schema, rng)
            for r in range(9)
            for c in range(9)
            if mask[r][c]
        }
        example_objects = {
            d: [_object_for(digit_map, d, schema, rng) for _ in range(n_examples)]
            for d in range(1, 10)
        }
        sample = SudokuSample(
            variant=variant,
            k_empty=k_empty,
            n_examples=n_examples,
            solution=solution,
            given_mask=mask,
            digit_map=digit_map,
            cell_objects=cell_objects,
            example_objects=example_objects,
            encoder=encoder,
            scene_seed=int(rng.integers(0, 2**31 - 1)),
        )
        sample.validate()
        samples.append(sample)
    return samples


# ---------------------------------------------------------------------------
# Pipelines: candidate examples -> digit classifier -> grid -> solver
# ---------------------------------------------------------------------------


def _categorical_combo(factors: dict) -> tuple:
    """Categorical projection of a factor dict; position is continuous
    and never part of a digit's combination."""
    return tuple(sorted((k, v) for k, v in factors.items() if isinstance(v, str)))


def _cell_factors(sample, r, c) -> dict:
    objs = getattr(sample, "cell_objects", None)
    if objs is not None:
        return objs[(r, c)].factor_values
    return sample.grid_scene(r, c).objects[0].factor_values


def _example_factors(sample, digit, i) -> dict:
    objs = getattr(sample, "example_objects", None)
    if objs is not None:
        return objs[digit][i].factor_values
    return sample.example_scene(digit, i).objects[0].factor_values


class GroundTruthPipeline:
    """Upper-bound reference: classify cells by exact attribute match
    against the candidate examples' combinations. One deterministic run."""

    seeds = (0,)

    def classify_grid(self, sample, seed: int) -> np.ndarray:
        combo_to_digit = {}
        for d in range(1, 10):
            for i in range(sample.n_examples):
                combo_to_digit[_categorical_combo(_example_factors(sample, d, i))] = d
        grid = np.zeros((9, 9), dtype=np.int64)
        for r, c in sample.given_cells():
            combo = _categorical_combo(_cell_factors(sample, r, c))
            digit = combo_to_digit.get(combo)
            if digit is None:
                raise DomainError(f"cell ({r},{c}) matches no candidate combination")
            grid[r][c] = digit
        return grid


class ConceptPipeline:
    """Infer discrete concepts for examples and cells, fit a digit tree
    per seed, classify the given cells."""

    def __init__(
        self,
        corpus: RetrievalCorpus,
        slot_mode: str = "max_one",
        top_k: int = 1,
        seeds=tuple(range(10)),
    ):
        self.corpus = corpus
        self.index = MultihotIndex(corpus)
        self.slot_mode = slot_mode
        self.top_k = top_k
        self.seeds = tuple(seeds)
        self._cache: dict = {}

    def _multihot(self, scene) -> np.ndarray:
        slots = infer(
            self.corpus, scene.encoding, slot_mode=self.slot_mode, top_k=self.top_k
        )
        return self.index.transform(slots[0])

    def _sample_vectors(self, sample: SudokuSample):
        key = id(sample)
        if key not in self._cache:
            xs, ys = [], []
            for d in range(1, 10):
                for i in range(sample.n_examples):
                    xs.append(self._multihot(sample.example_scene(d, i)))
                    ys.append(d)
            cells = {
                (r, c): self._multihot(sample.grid_scene(r, c))
                for r, c in sample.given_cells()
            }
            self._cache = {key: (np.stack(xs), ys, cells)}  # keep one sample
        return self._cache[key]

    def classify_grid(self, sample: SudokuSample, seed: int) -> np.ndarray:
        xs, ys, cells = self._sample_vectors(sample)
        tree = fit_tree(xs, ys, seed=seed)
        grid = np.zeros((9, 9), dtype=np.int64)
        for (r, c), vec in cells.items():
            grid[r][c] = tree.predict(vec)
        return grid


@dataclass
class PuzzleOutcome:
    solved: bool
    digit_error_rate: float
    failure_reason: str  # none | misclassification | contradiction
    solution_mismatch: bool  # solver succeeded but found a different grid


@dataclass
class SampleResult:
    outcomes: list

    @property
    def solve_rate(self) -> float:
        return float(np.mean([o.solved for o in self.outcomes]))

    @property
    def digit_error_rate(self) -> float:
        return float(np.mean([o.digit_error_rate for o in self.outcomes]))

    @property
    def mismatch_rate(self) -> float:
        return float(np.mean([o.solution_mismatch for o in self.outcomes]))


def solve_sample(sample: SudokuSample, pipeline) -> SampleResult:
    """Classify, solve and score one sample once per classifier seed."""
    given = sample.given_cells()
    outcomes = []
    for seed in pipeline.seeds:
        grid = pipeline.classify_grid(sample, seed)
        errors = sum(
            1 for r, c in given if int(grid[r][c]) != int(sample.solution[r][c])
        )
        error_rate = errors / len(given) if given else 0.0
        solved_grid = solve_grid(grid)
        if solved_grid is None:
            outcomes.append(
                PuzzleOutcome(
                    solved=False,
                    digit_error_rate=error_rate,
                    failure_reason="misclassification" if errors else "contradiction",
                    solution_mismatch=False,
                )
            )
        else:
            outcomes.append(
                PuzzleOutcome(
                    solved=True,
                    digit_error_rate=error_rate,
                    failure_reason="none",
                    solution_mismatch=bool((solved_grid != sample.solution).any()),
                )
            )
    return SampleResult(outcomes)


def evaluate_suite(samples, pipeline_factory) -> dict:
    """Aggregate solve and digit-error rates per (variant, K, N) cell.

    `pipeline_factory(cell_samples)` builds the pipeline per cell, so a
    corpus-backed pipeline can be reused or rebuilt as the caller needs.
    """
    if not samples:
        raise ValidationError("evaluate_suite needs at least one sample")
    cells: dict = {}
    for s in samples:
        cells.setdefault((s.variant, s.k_empty, s.n_examples), []).append(s)
    rows = []
    for (variant, k, n), cell_samples in sorted(cells.items()):
        pipeline = pipeline_factory(cell_samples)
        results = [solve_sample(s, pipeline) for s in cell_samples]
        rows.append(
            {
                "variant": variant,
                "k_empty": k,
                "n_examples": n,
                "count": len(cell_samples),
                "solved_pct": 100.0 * float(np.mean([r.solve_rate for r in results])),
                "digit_error_pct": 100.0
                * float(np.mean([r.digit_error_rate for r in results])),
                "mismatch_pct": 100.0
                * float(np.mean([r.mismatch_rate for r in results])),
            }
        )
    return {"format": "sudoku-report/1", "rows": rows}


def save_report(path, report: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)


def load_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        report = json.load(fh)
    if report.get("format") != "sudoku-report/1":
        raise FormatError(f"unsupported report format {report.get('format')!r}")
    return report


# ---------------------------------------------------------------------------
# On-disk datasets: manifest + per-sample scene files + solutions
# ---------------------------------------------------------------------------


def write_dataset(directory, samples: list) -> None:
    """One directory per configuration: manifest, a solutions file, and
    per sample one encoding file holding given-cell scenes then example
    scenes (digit-major)."""
    if not samples:
        raise ValidationError("no samples to write")
    first = samples[0]
    os.makedirs(directory, exist_ok=True)
    manifest = {
        "format": "sudoku-dataset/1",
        "variant": first.variant,
        "k_empty": first.k_empty,
        "n_examples": first.n_examples,
        "count": len(samples),
        "encoder_config": first.encoder.config.to_dict(),
        "schema": first.encoder.schema.to_dict(),
    }
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    solutions = []
    for i, s in enumerate(samples):
        if (s.variant, s.k_empty, s.n_examples) != (
            first.variant,
            first.k_empty,
            first.n_examples,
        ):
            raise ValidationError("one dataset directory holds one configuration")
        scenes = [s.grid_scene(r, c) for r, c in s.given_cells()]
        for d in range(1, 10):
            scenes.extend(s.example_scene(d, i2) for i2 in range(s.n_examples))
        write_encodings(
            os.path.join(directory, f"sample_{i:04d}.bsenc"), scenes, s.encoder.schema
        )
        solutions.append(
            {
                "solution": s.solution.tolist(),
                "given_mask": s.given_mask.astype(int).tolist(),
                "digit_map": {str(d): m for d, m in s.digit_map.items()},
                "scene_seed": s.scene_seed,
            }
        )
    with open(os.path.join(directory, "solutions.json"), "w", encoding="utf-8") as fh:
        json.dump(solutions, fh, indent=1, sort_keys=True)


@dataclass
class StoredSample:
    """A dataset sample read back from disk: scenes are materialized."""

    variant: str
    k_empty: int
    n_examples: int
    solution: np.ndarray
    given_mask: np.ndarray
    digit_map: dict
    given_scenes: dict  # (r, c) -> LabeledScene
    example_scenes: dict  # digit -> [LabeledScene]

    def given_cells(self) -> list:
        return [(r, c) for r in range(9) for c in range(9) if self.given_mask[r][c]]

    def grid_scene(self, r, c):
        return self.given_scenes[(r, c)]

    def example_scene(self, digit, i):
        return self.example_scenes[digit][i]


def read_dataset(directory) -> tuple:
    with open(os.path.join(directory, "manifest.json"), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != "sudoku-dataset/1":
        raise FormatError("not a sudoku dataset directory")
    with open(os.path.join(directory, "solutions.json"), "r", encoding="utf-8") as fh:
        solutions = json.load(fh)
    n_examples = manifest["n_examples"]
    samples = []
    for i, rec in enumerate(solutions):
        scenes, _schema = read_encodings(os.path.join(directory, f"sample_{i:04d}.bsenc"))
        solution = np.array(rec["solution"], dtype=np.int64)
        mask = np.array(rec["given_mask"], dtype=bool)
        cells = [(r, c) for r in range(9) for c in range(9) if mask[r][c]]
        if len(scenes) != len(cells) + 9 * n_examples:
            raise FormatError(f"sample {i}: scene count mismatch")
        given_scenes = {cell: scenes[k] for k, cell in enumerate(cells)}
        example_scenes = {
            d: scenes[len(cells) + (d - 1) * n_examples : len(cells) + d * n_examples]
            for d in range(1, 10)
        }
        samples.append(
            StoredSample(
                variant=manifest["variant"],
                k_empty=manifest["k_empty"],
                n_examples=n_examples,
                solution=solution,
                given_mask=mask,
                digit_map={int(d): m for d, m in rec["digit_map"].items()},
                given_scenes=given_scenes,
                example_scenes=example_scenes,
            )
        )
    return samples, manifest
