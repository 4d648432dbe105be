"""Command-line entry points for the full pipeline.

Exit codes: 0 success, 2 I/O or file-format failures, 3 invalid
arguments or configuration, 4 domain errors. Failures additionally emit
one JSON object on stderr so scripts can parse the cause.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

from . import api as api_module
from .classifier import evaluate_property_accuracy
from .clustering import DEFAULT_GRID, ClusterParams
from .corpus import fit_corpus, infer, load_corpus, save_corpus
from .encodings import (
    SyntheticDecoder,
    SyntheticEncoder,
    build_synthetic_encoder,
    clevr_easy_schema,
    clevr_schema,
    default_config,
    generate_scenes,
    read_encodings,
    write_encodings,
)
from .errors import DomainError, FormatError, ValidationError
from .inspection import (
    comparative_inspect,
    implicit_inspect,
    interventional_inspect,
    similarity_inspect,
)
from .revision import apply_feedback, loads_feedback, save_log
from .sudoku import (
    ConceptPipeline,
    GroundTruthPipeline,
    default_sudoku_encoder,
    evaluate_suite,
    generate_dataset,
    read_dataset,
    save_report,
    write_dataset,
)
from .workspace import open_workspace, read_encoder_config, write_encoder_config

EXIT_IO = 2
EXIT_VALIDATION = 3
EXIT_DOMAIN = 4


def _schema_for(name: str):
    if name == "clevr":
        return clevr_schema()
    if name == "clevr-easy":
        return clevr_easy_schema()
    raise ValidationError(f"unknown schema {name!r}")


def _file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def cmd_gen_data(args) -> int:
    schema = _schema_for(args.schema)
    config = default_config(
        schema,
        n_slots=args.n_slots,
        block_dim=args.block_dim,
        cluster_spread=args.sigma,
        duplicate_clusters_per_value=args.dup,
        seed=args.seed,
    )
    encoder = build_synthetic_encoder(schema, config)
    scenes = generate_scenes(
        encoder, args.count, seed=args.seed, objects_per_scene=args.objects_per_scene
    )
    write_encodings(args.out, scenes, schema)
    write_encoder_config(args.out + ".encoder.json", schema, config)
    print(f"wrote {len(scenes)} scenes to {args.out}")
    return 0


def cmd_fit(args) -> int:
    scenes, _schema = read_encodings(args.encodings)
    params = None
    if args.min_cluster_size is not None or args.min_samples is not None:
        if args.min_cluster_size is None or args.min_samples is None:
            raise ValidationError(
                "--min-cluster-size and --min-samples must be given together"
            )
        params = ClusterParams(
            args.min_cluster_size,
            args.min_samples,
            allow_single_cluster=not args.no_single_cluster,
        )
    grid = tuple(int(v) for v in args.grid.split(",")) if args.grid else DEFAULT_GRID
    corpus, report = fit_corpus(
        scenes,
        slot_mode=args.slot_mode.replace("-", "_"),
        threshold=args.threshold,
        cluster=args.cluster,
        grid=grid,
        params=params,
        kmeans_k=args.k,
        exemplars_per_cluster=args.exemplars,
        allow_single_cluster=not args.no_single_cluster,
        seed=args.seed,
        source_hash=_file_hash(args.encodings),
    )
    save_corpus(args.out, corpus)
    print(f"{'block':>5} {'points':>7} {'concepts':>8} {'noise':>6}  params")
    for row in report:
        print(
            f"{row['block']:>5} {row['n_points']:>7} {row['n_clusters']:>8} "
            f"{row['n_noise']:>6}  {row['params']}"
        )
    print(f"corpus v{corpus.version} -> {args.out}")
    return 0


def cmd_infer(args) -> int:
    corpus = load_corpus(args.corpus)
    scenes, _schema = read_encodings(args.encodings)
    with open(args.out, "w", encoding="utf-8") as fh:
        for i, scene in enumerate(scenes):
            for cs in infer(
                corpus,
                scene.encoding,
                slot_mode=args.slot_mode.replace("-", "_"),
                threshold=args.threshold,
                top_k=args.top_k,
            ):
                rec = {"scene": i, "slot": cs.slot_id, "concepts": cs.concept_ids}
                if cs.probabilities is not None:
                    rec["probabilities"] = cs.probabilities
                fh.write(json.dumps(rec) + "\n")
    print(f"inferred {len(scenes)} scenes -> {args.out}")
    return 0


def _card_json(card) -> dict:
    return {
        "block": card.block,
        "concept_id": card.concept_id,
        "n_exemplars": len(card.exemplars),
        "population_share": card.population_share,
        "matched": [
            {"scene": m.scene_id, "slot": m.slot_id, "factors": m.factors}
            for m in card.matched
        ],
    }


def cmd_inspect(args) -> int:
    corpus = load_corpus(args.corpus)
    dataset = None
    if args.encodings:
        dataset, _schema = read_encodings(args.encodings)
    if args.mode == "implicit":
        card = implicit_inspect(corpus, args.block, args.concept, dataset)
        print(json.dumps(_card_json(card), indent=1))
    elif args.mode == "comparative":
        if args.concept2 is None:
            raise ValidationError("comparative mode needs --concept2")
        c1, c2, dist = comparative_inspect(
            corpus, args.block, args.concept, args.concept2, dataset
        )
        print(
            json.dumps(
                {
                    "first": _card_json(c1),
                    "second": _card_json(c2),
                    "prototype_distance": dist,
                },
                indent=1,
            )
        )
    elif args.mode == "similarity":
        report = similarity_inspect(corpus, args.block, args.concept)
        print(
            json.dumps(
                {
                    "block": report.block,
                    "anchor": report.anchor,
                    "ranked": report.ranked,
                },
                indent=1,
            )
        )
    elif args.mode == "interventional":
        if dataset is None or args.scene is None:
            raise ValidationError(
                "interventional mode needs --encodings and --scene (and --slot)"
            )
        if not args.encoder_config:
            raise ValidationError("interventional mode needs --encoder-config")
        schema, config = read_encoder_config(args.encoder_config)
        decoder = SyntheticDecoder(SyntheticEncoder(schema, config))
        scene = dataset[args.scene]
        slot = args.slot if args.slot is not None else scene.object_slot_ids[0]
        result = interventional_inspect(
            scene, slot, args.block, args.concept, corpus, decoder
        )
        print(
            json.dumps(
                {
                    "before": {k: str(v) for k, v in result.before.items()},
                    "after": {k: str(v) for k, v in result.after.items()},
                    "changed": result.changed,
                    "no_visible_effect": result.no_visible_effect,
                },
                indent=1,
            )
        )
    else:
        raise ValidationError(f"unknown inspection mode {args.mode!r}")
    return 0


def cmd_revise(args) -> int:
    corpus = load_corpus(args.corpus)
    with open(args.feedback, "r", encoding="utf-8") as fh:
        document = loads_feedback(fh.read())
    revised, entries = apply_feedback(corpus, document)
    save_corpus(args.out, revised)
    if args.log:
        save_log(args.log, entries)
    print(f"applied {len(entries)} actions: v{corpus.version} -> v{revised.version}")
    return 0


def cmd_eval_q1(args) -> int:
    corpus = load_corpus(args.corpus)
    train, schema = read_encodings(args.train)
    test, _schema = read_encodings(args.test)
    rows = []
    for n_train in (int(v) for v in args.n_train.split(",")):
        accs = evaluate_property_accuracy(
            corpus, train, test, schema, n_train, top_k=args.top_k
        )
        rows.append({"n_train": n_train, "accuracy": accs})
        print(f"n_train={n_train:>5}  mean={accs['mean'] * 100:.2f}%  {accs}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump({"format": "q1-report/1", "rows": rows}, fh, indent=1, sort_keys=True)
    return 0


def cmd_sudoku_gen(args) -> int:
    encoder = default_sudoku_encoder(
        args.variant,
        sigma=args.sigma,
        duplicate_clusters_per_value=args.dup,
        block_dim=args.block_dim,
        seed=args.encoder_seed,
    )
    samples = generate_dataset(
        args.variant, args.k, args.examples, args.count, args.seed, encoder=encoder
    )
    write_dataset(args.out, samples)
    print(f"wrote {len(samples)} puzzles to {args.out}")
    return 0


def cmd_sudoku_eval(args) -> int:
    samples, _manifest = read_dataset(args.dataset)
    if args.pipeline == "gt":
        factory = lambda _cell: GroundTruthPipeline()  # noqa: E731
    else:
        if not args.corpus:
            raise ValidationError("ncb pipeline needs --corpus")
        corpus = load_corpus(args.corpus)
        factory = lambda _cell: ConceptPipeline(  # noqa: E731
            corpus, top_k=args.top_k, seeds=tuple(range(args.seeds))
        )
    report = evaluate_suite(samples, factory)
    for row in report["rows"]:
        print(
            f"{row['variant']:>5} K={row['k_empty']:>2} N={row['n_examples']:>2}  "
            f"solved {row['solved_pct']:6.2f}%  digit errors {row['digit_error_pct']:5.2f}%"
        )
    if args.out:
        save_report(args.out, report)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    workspace = open_workspace(args.workspace)
    app = api_module.create_app(workspace, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hardbind")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="synthesize labeled block-slot encodings")
    g.add_argument("--schema", choices=("clevr", "clevr-easy"), default="clevr-easy")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--sigma", type=float, default=0.05)
    g.add_argument("--dup", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n-slots", type=int, default=4)
    g.add_argument("--block-dim", type=int, default=128)
    g.add_argument("--objects-per-scene", type=int, default=1)
    g.set_defaults(func=cmd_gen_data)

    f = sub.add_parser("fit", help="cluster object-slot encodings and distill a corpus")
    f.add_argument("--encodings", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--grid", default=None, help="comma list, default 5,10,...,100")
    f.add_argument("--cluster", choices=("hdbscan", "kmeans"), default="hdbscan")
    f.add_argument("--k", type=int, default=None, help="k for --cluster kmeans")
    f.add_argument("--min-cluster-size", type=int, default=None)
    f.add_argument("--min-samples", type=int, default=None)
    f.add_argument("--exemplars", type=int, default=5)
    f.add_argument("--slot-mode", choices=("max-one", "threshold"), default="max-one")
    f.add_argument("--threshold", type=float, default=None)
    f.add_argument("--no-single-cluster", action="store_true")
    f.add_argument("--seed", type=int, default=0)
    f.set_defaults(func=cmd_fit)

    i = sub.add_parser("infer", help="map encodings to concept-slot encodings")
    i.add_argument("--corpus", required=True)
    i.add_argument("--encodings", required=True)
    i.add_argument("--out", required=True)
    i.add_argument("--top-k", type=int, default=1)
    i.add_argument("--slot-mode", choices=("max-one", "threshold"), default="max-one")
    i.add_argument("--threshold", type=float, default=None)
    i.set_defaults(func=cmd_infer)

    n = sub.add_parser("inspect", help="query the concept space")
    n.add_argument(
        "--mode",
        choices=("implicit", "comparative", "interventional", "similarity"),
        required=True,
    )
    n.add_argument("--corpus", required=True)
    n.add_argument("--block", type=int, required=True)
    n.add_argument("--concept", type=int, required=True)
    n.add_argument("--concept2", type=int, default=None)
    n.add_argument("--encodings", default=None)
    n.add_argument("--encoder-config", default=None)
    n.add_argument("--scene", type=int, default=None)
    n.add_argument("--slot", type=int, default=None)
    n.set_defaults(func=cmd_inspect)

    r = sub.add_parser("revise", help="apply a feedback document transactionally")
    r.add_argument("--corpus", required=True)
    r.add_argument("--feedback", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--log", default=None)
    r.set_defaults(func=cmd_revise)

    q = sub.add_parser("eval-q1", help="property prediction from concept encodings")
    q.add_argument("--corpus", required=True)
    q.add_argument("--train", required=True)
    q.add_argument("--test", required=True)
    q.add_argument("--n-train", default="2000,200,50,20")
    q.add_argument("--top-k", type=int, default=1)
    q.add_argument("--out", default=None)
    q.set_defaults(func=cmd_eval_q1)

    sg = sub.add_parser("sudoku-gen", help="generate an encoded-object Sudoku dataset")
    sg.add_argument("--variant", choices=("easy", "full"), required=True)
    sg.add_argument("--k", type=int, choices=(10, 30, 50), required=True)
    sg.add_argument("--examples", type=int, choices=(1, 3, 5, 10), required=True)
    sg.add_argument("--count", type=int, required=True)
    sg.add_argument("--seed", type=int, default=0)
    sg.add_argument("--sigma", type=float, default=0.05)
    sg.add_argument("--dup", type=int, default=1)
    sg.add_argument("--block-dim", type=int, default=32)
    sg.add_argument("--encoder-seed", type=int, default=7)
    sg.add_argument("--out", required=True)
    sg.set_defaults(func=cmd_sudoku_gen)

    se = sub.add_parser("sudoku-eval", help="solve a dataset with a chosen pipeline")
    se.add_argument("--dataset", required=True)
    se.add_argument("--pipeline", choices=("gt", "ncb"), default="gt")
    se.add_argument("--corpus", default=None)
    se.add_argument("--seeds", type=int, default=10)
    se.add_argument("--top-k", type=int, default=1)
    se.add_argument("--out", default=None)
    se.set_defaults(func=cmd_sudoku_eval)

    s = sub.add_parser("serve", help="serve the inspection/revision HTTP API")
    s.add_argument("--workspace", required=True)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8711)
    s.add_argument("--static", default=None, help="directory of built UI assets")
    s.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_IO
    except ValidationError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_VALIDATION
    except DomainError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
