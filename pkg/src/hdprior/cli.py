"""Command-line interface.

Thin wrapper over the library: every subcommand parses a model file, runs
one operation and writes text output.  Exit codes: 0 success, 1 validation
problem, 2 numerical failure, 3 I/O failure.  Errors are emitted as a JSON
block on stderr so callers can machine-read them.

HDPRIOR_THREADS (default 1) caps worker threads for batch sampling; draws
are chunked deterministically, so output bytes do not depend on the thread
count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import formats, hd_model
from .errors import NumericalError, ValidationError
from .model_file import parse_model
from .numerics import RandomSource

EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


def _fail(exc: BaseException, code: int) -> int:
    block = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(block), file=sys.stderr)
    return code


def _write(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _load(path: str) -> hd_model.HDPriorModel:
    return hd_model.assemble(parse_model(path))


def cmd_validate(args) -> int:
    from .tree import validate as validate_tree

    mf = parse_model(args.model)
    diag = validate_tree(mf.tree)
    print(f"{args.model}: ok")
    print(json.dumps({
        "n": mf.n,
        "likelihood": mf.likelihood,
        "effects": [e.name for e in mf.effects],
        "splits": diag["n_splits"],
        "descendants": {str(k): v for k, v in diag["descendants"].items()},
        "residual": mf.residual,
    }, indent=2))
    return 0


def cmd_calibrate(args) -> int:
    model = _load(args.model)
    _write(formats.report_json(model.report), args.output)
    return 0


def cmd_density(args) -> int:
    model = _load(args.model)
    if not 1 <= args.split <= len(model.splits):
        raise ValidationError(
            f"--split must be in 1..{len(model.splits)} for this model"
        )
    cs = model.splits[args.split - 1]
    if cs.kind == "pc":
        from .split_priors import tabulate

        table = tabulate(cs.pc, args.points) if args.points != hd_model.TABLE_POINTS else cs.table
    else:
        from .split_priors import tabulate_dirichlet_marginal

        table = (
            tabulate_dirichlet_marginal(cs.dirichlet, args.points)
            if args.points != hd_model.TABLE_POINTS
            else cs.table
        )
    _write(table.to_csv(), args.output)
    return 0


def cmd_sample(args) -> int:
    model = _load(args.model)
    threads = max(1, int(os.environ.get("HDPRIOR_THREADS", "1")))
    draws = hd_model.sample_chunked(model, args.n, args.seed, threads=threads)
    _write(formats.samples_csv(model, draws), args.output)
    return 0


def cmd_marginals(args) -> int:
    model = _load(args.model)
    report = hd_model.marginal_report(model, RandomSource(args.seed), args.n)
    _write(formats.marginals_csv(report), args.output)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdprior",
        description="Joint hierarchical-decomposition priors for variance parameters",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_model(p):
        p.add_argument("-m", "--model", required=True, help="model file (JSON)")

    p = sub.add_parser("validate", help="validate a model file")
    add_model(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("calibrate", help="assemble and report calibrated hyperparameters")
    add_model(p)
    p.add_argument("-o", "--output", default=None, help="report path (default stdout)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("density", help="export a split's density table as CSV")
    add_model(p)
    p.add_argument("--split", type=int, required=True, help="split index (1-based)")
    p.add_argument("--points", type=int, default=hd_model.TABLE_POINTS)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("sample", help="draw joint samples and export CSV")
    add_model(p)
    p.add_argument("-n", type=int, required=True, help="number of draws")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("marginals", help="Monte Carlo marginal summaries as CSV")
    add_model(p)
    p.add_argument("-n", type=int, required=True, help="number of draws")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_marginals)

    p = sub.add_parser("serve", help="start the elicitation HTTP server")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        return _fail(exc, EXIT_VALIDATION)
    except NumericalError as exc:
        return _fail(exc, EXIT_NUMERICAL)
    except OSError as exc:
        return _fail(exc, EXIT_IO)


if __name__ == "__main__":
    sys.exit(main())
