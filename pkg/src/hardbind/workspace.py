"""Workspace manifest: one JSON file naming the artifacts a service run
needs (encoder config, encodings, corpus, revision log, datasets,
reports). Paths are resolved relative to the manifest itself and must
exist and parse when the workspace is opened.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .corpus import RetrievalCorpus, load_corpus
from .encodings import EncoderConfig, FactorSchema, SyntheticEncoder, read_encodings
from .errors import FormatError
from .revision import load_log

WORKSPACE_FORMAT = "workspace/1"


def write_encoder_config(path, schema: FactorSchema, config: EncoderConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "format": "encoder-config/1",
                "schema": schema.to_dict(),
                "config": config.to_dict(),
            },
            fh,
            indent=1,
            sort_keys=True,
        )


def read_encoder_config(path) -> tuple:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "encoder-config/1":
        raise FormatError(f"unsupported encoder config format {doc.get('format')!r}")
    return FactorSchema.from_dict(doc["schema"]), EncoderConfig.from_dict(doc["config"])


@dataclass
class Workspace:
    root: str
    manifest: dict
    schema: FactorSchema
    encoder: SyntheticEncoder
    corpus: RetrievalCorpus
    scenes: list
    log_path: str
    log: list = field(default_factory=list)


def write_manifest(path, entries: dict) -> None:
    doc = {"format": WORKSPACE_FORMAT}
    doc.update(entries)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)


def open_workspace(manifest_path) -> Workspace:
    """Load and validate everything the manifest references."""
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != WORKSPACE_FORMAT:
        raise FormatError(f"unsupported workspace format {manifest.get('format')!r}")
    root = os.path.dirname(os.path.abspath(manifest_path))

    def resolve(key, required=True):
        rel = manifest.get(key)
        if rel is None:
            if required:
                raise FormatError(f"workspace manifest missing {key!r}")
            return None
        return os.path.join(root, rel)

    schema, config = read_encoder_config(resolve("encoder_config"))
    encoder = SyntheticEncoder(schema, config)
    corpus = load_corpus(resolve("corpus"))
    scenes, file_schema = read_encodings(resolve("encodings"))
    if file_schema.to_dict() != schema.to_dict():
        raise FormatError("encodings schema does not match the encoder config")
    log_path = resolve("revision_log", required=False) or os.path.join(
        root, "revision_log.jsonl"
    )
    log = load_log(log_path) if os.path.exists(log_path) else []
    return Workspace(
        root=root,
        manifest=manifest,
        schema=schema,
        encoder=encoder,
        corpus=corpus,
        scenes=scenes,
        log_path=log_path,
        log=log,
    )
