import pytest

from hardbind.encodings import (
    EncoderConfig,
    FactorSchema,
    Category,
    build_synthetic_encoder,
    clevr_easy_schema,
    generate_scenes,
)
from hardbind.corpus import fit_corpus


@pytest.fixture(scope="session")
def easy_world():
    """Small clean CLEVR-Easy-style world shared by read-only tests:
    sigma=0.05, 16-dim blocks, 240 fit scenes, grid-searched corpus."""
    schema = clevr_easy_schema()
    config = EncoderConfig(
        n_slots=3,
        n_blocks=8,
        block_dim=16,
        factor_to_block={"shape": 0, "color": 1, "position": 2},
        cluster_spread=0.05,
        seed=11,
    )
    encoder = build_synthetic_encoder(schema, config)
    scenes = generate_scenes(encoder, 240, seed=12)
    corpus, report = fit_corpus(scenes, grid=(5, 10, 20), exemplars_per_cluster=3, seed=0)
    return {
        "schema": schema,
        "config": config,
        "encoder": encoder,
        "scenes": scenes,
        "corpus": corpus,
        "report": report,
    }


@pytest.fixture(scope="session")
def dup_world():
    """Duplicate-concept world: every value owns two centroids, so the
    corpus is over-parameterized the way revision tests need."""
    schema = FactorSchema(
        (
            Category("shape", ("cube", "sphere", "cylinder")),
            Category("color", ("red", "purple")),
            Category("position"),
        )
    )
    config = EncoderConfig(
        n_slots=2,
        n_blocks=4,
        block_dim=12,
        factor_to_block={"shape": 0, "color": 1, "position": 2},
        cluster_spread=0.0,
        duplicate_clusters_per_value=2,
        seed=21,
    )
    encoder = build_synthetic_encoder(schema, config)
    scenes = generate_scenes(encoder, 200, seed=22)
    corpus, _report = fit_corpus(
        scenes, params=None, grid=(5, 10), exemplars_per_cluster=2, seed=0
    )
    return {
        "schema": schema,
        "config": config,
        "encoder": encoder,
        "scenes": scenes,
        "corpus": corpus,
    }
