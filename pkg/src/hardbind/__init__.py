"""Discrete concept extraction from continuous block-slot encodings.

The pipeline: a ground-truth-factored synthetic encoder produces
block-slot scenes; per-block density clustering distills a retrieval
corpus of prototypes and exemplars; nearest-neighbor lookup against the
corpus yields discrete concept-slot encodings that feed inspection,
symbolic revision, property classifiers and Sudoku-style reasoning.
"""

from .clustering import ClusterParams, Clustering, dbcv_score, fit_hdbscan, fit_kmeans, grid_search
from .corpus import (
    BlockCorpus,
    ConceptSlot,
    CorpusEntry,
    RetrievalCorpus,
    distill,
    fit_corpus,
    infer,
    load_corpus,
    save_corpus,
    select_concept,
    select_concept_topk,
)
from .encodings import (
    BlockSlotEncoding,
    Category,
    EncoderConfig,
    FactorSchema,
    GroundTruthObject,
    LabeledScene,
    SyntheticDecoder,
    SyntheticEncoder,
    build_synthetic_encoder,
    clevr_easy_schema,
    clevr_schema,
    default_config,
    encode_scene,
    generate_scenes,
    read_encodings,
    select_object_slots,
    write_encodings,
)
from .errors import DomainError, FormatError, HardbindError, ValidationError

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
