"""Command-line front end: synthesize, encode, search, evaluate, sweep.

Exit codes: 0 on success, 1 on runtime or data errors, 2 on usage errors.
Diagnostics go to stderr; with `--out -` stdout carries nothing but data.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from hashfind.embeddings import SPLIT_TAGS, load_embeddings, save_embeddings
from hashfind.encoding import encode_set
from hashfind.evaluation import evaluate, sweep
from hashfind.index import batch_query, build_index, deserialize_index, serialize_index
from hashfind.synthetic import generate_synthetic


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _nonnegative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return value


def _nonnegative_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {value}")
    return value


def _percentile_arg(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not 0.0 <= value <= 100.0:
        raise argparse.ArgumentTypeError(f"percentile must lie in [0, 100], got {value}")
    return value


def _depth_arg(text: str) -> int | str:
    if text == "full":
        return "full"
    return _positive_int(text)


def _percentile_list(text: str) -> list[float]:
    """Comma-separated percentiles, or an inclusive start:stop:step range."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("range syntax is start:stop:step")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{text!r} is not a numeric range") from None
        if step <= 0:
            raise argparse.ArgumentTypeError("range step must be positive")
        values = [float(v) for v in np.arange(start, stop + step / 2, step)]
    else:
        try:
            values = [float(p) for p in text.split(",") if p.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"{text!r} is not a comma-separated list") from None
    if not values:
        raise argparse.ArgumentTypeError("percentile list is empty")
    for v in values:
        if not 0.0 <= v <= 100.0:
            raise argparse.ArgumentTypeError(f"percentile must lie in [0, 100], got {v}")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hashfind",
        description="Binary-hash similarity retrieval over embedding vectors.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("synth", help="generate a labeled synthetic embedding set")
    p.add_argument("--classes", type=_positive_int, required=True, help="number of classes")
    p.add_argument("--per-class", type=_positive_int, required=True, help="samples per class")
    p.add_argument("--dim", type=_positive_int, required=True, help="embedding dimension")
    p.add_argument("--separation", type=_nonnegative_float, default=6.0,
                   help="class-center separation (default 6.0)")
    p.add_argument("--noise", type=_nonnegative_float, default=0.2,
                   help="per-sample noise scale (default 0.2)")
    p.add_argument("--seed", type=int, default=42, help="generator seed (default 42)")
    p.add_argument("--split", choices=SPLIT_TAGS, default="other")
    p.add_argument("--format", choices=("csv", "binary"), default="csv",
                   help="output format (default csv)")
    p.add_argument("--out", required=True, help="output path, - for stdout (csv only)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("encode", aliases=["build"],
                       help="binarize embeddings and write an index file")
    p.add_argument("--embeddings", required=True, help="input embedding file")
    p.add_argument("--format", choices=("csv", "binary"), default="csv",
                   help="input format (default csv)")
    p.add_argument("--percentile", type=_percentile_arg, default=50.0,
                   help="threshold percentile (default 50)")
    p.add_argument("--out", required=True, help="index file to write")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("query", help="rank references for each query embedding")
    p.add_argument("--index", required=True, help="index file from encode/build")
    p.add_argument("--queries", required=True, help="query embedding file")
    p.add_argument("--format", choices=("csv", "binary"), default="csv",
                   help="query file format (default csv)")
    p.add_argument("-k", "--k", type=_positive_int, default=100,
                   help="hits per query (default 100)")
    p.add_argument("--threads", type=_nonnegative_int, default=None,
                   help="worker threads, 0 for one per CPU (default: HASHFIND_THREADS or 1)")
    p.add_argument("--out", default="-", help="output CSV path, - for stdout (default)")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="score retrieval quality with mAP")
    p.add_argument("--references", required=True, help="reference embedding file")
    p.add_argument("--queries", required=True, help="query embedding file")
    p.add_argument("--format", choices=("csv", "binary"), default="csv",
                   help="input format for both files (default csv)")
    p.add_argument("--percentile", type=_percentile_arg, default=50.0,
                   help="threshold percentile (default 50)")
    p.add_argument("--depth", type=_depth_arg, default="full",
                   help="ranking depth: a positive integer or 'full' (default)")
    p.add_argument("--threads", type=_nonnegative_int, default=None,
                   help="worker threads, 0 for one per CPU (default: HASHFIND_THREADS or 1)")
    p.add_argument("--out", default="-", help="report JSON path, - for stdout (default)")
    p.add_argument("--per-query", default=None, metavar="PATH",
                   help="also write per-query AP rows as CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="mAP across a list of threshold percentiles")
    p.add_argument("--references", required=True, help="reference embedding file")
    p.add_argument("--queries", required=True, help="query embedding file")
    p.add_argument("--format", choices=("csv", "binary"), default="csv",
                   help="input format for both files (default csv)")
    p.add_argument("--percentiles", type=_percentile_list, required=True,
                   help="comma-separated values or start:stop:step, e.g. 0:100:2")
    p.add_argument("--depth", type=_depth_arg, default="full",
                   help="ranking depth: a positive integer or 'full' (default)")
    p.add_argument("--threads", type=_nonnegative_int, default=None,
                   help="worker threads, 0 for one per CPU (default: HASHFIND_THREADS or 1)")
    p.add_argument("--out", default="-", help="curve CSV path, - for stdout (default)")
    p.set_defaults(func=cmd_sweep)

    return parser


def cmd_synth(args: argparse.Namespace) -> int:
    emb = generate_synthetic(
        args.classes, args.per_class, args.dim,
        args.separation, args.noise, args.seed, split_tag=args.split,
    )
    if args.out == "-":
        sys.stdout.write(_render_embeddings_csv(emb))
    else:
        _save_embeddings_atomic(emb, Path(args.out), args.format)
    return 0


def cmd_encode(args: argparse.Namespace) -> int:
    emb = load_embeddings(args.embeddings, format=args.format)
    index = build_index(encode_set(emb, args.percentile))
    serialize_index(index, args.out)
    return 0


def cmd_query(args: argparse.Namespace) -> int:
    index = deserialize_index(args.index)
    queries = load_embeddings(args.queries, format=args.format)
    if queries.dim != index.code_length:
        raise ValueError(
            f"query dimension {queries.dim} does not match "
            f"index code length {index.code_length}"
        )
    codes = encode_set(queries, index.percentile)
    results = batch_query(index, codes, k=args.k, threads=args.threads)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["query_id", "rank", "reference_id", "reference_label", "distance"])
    for result in results:
        for rank, hit in enumerate(result.hits, start=1):
            writer.writerow(
                [result.query_id, rank, hit.reference_id, hit.reference_label, hit.distance]
            )
    _emit_text(args.out, buf.getvalue())
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    reference = load_embeddings(args.references, format=args.format)
    queries = load_embeddings(args.queries, format=args.format)
    index = build_index(encode_set(reference, args.percentile))
    report = evaluate(
        index, queries, percentile=args.percentile, depth=args.depth, threads=args.threads
    )
    _emit_text(args.out, json.dumps(report.to_json_dict(), indent=2) + "\n")
    if args.per_query:
        buf = io.StringIO()
        report.write_per_query_csv(buf)
        _atomic_write_text(Path(args.per_query), buf.getvalue())
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    reference = load_embeddings(args.references, format=args.format)
    queries = load_embeddings(args.queries, format=args.format)
    report = sweep(
        reference, queries, args.percentiles, depth=args.depth, threads=args.threads
    )
    buf = io.StringIO()
    report.write_csv(buf)
    _emit_text(args.out, buf.getvalue())
    argmax = ", ".join(f"{q:g}" for q in report.argmax_percentiles)
    line = f"max mAP {report.best_map!r} at percentiles: {argmax}"
    # keep stdout pure when the curve itself streams there
    print(line, file=sys.stderr if args.out == "-" else sys.stdout)
    return 0


def _render_embeddings_csv(emb) -> str:
    with tempfile.TemporaryDirectory() as tmpdir:
        tmp = Path(tmpdir) / "embeddings.csv"
        save_embeddings(emb, tmp, "csv")
        return tmp.read_text(encoding="utf-8")


def _save_embeddings_atomic(emb, path: Path, format: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    os.close(fd)
    try:
        save_embeddings(emb, tmp, format)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _emit_text(out: str, text: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        _atomic_write_text(Path(out), text)


def _atomic_write_text(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("encode", "build") and args.out == "-":
        parser.error("the index is a binary file and cannot be written to stdout")
    if args.command == "synth" and args.format == "binary" and args.out == "-":
        parser.error("binary embeddings cannot be written to stdout")
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except (ValueError, OSError) as exc:
        print(f"hashfind: error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())
