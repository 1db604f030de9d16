"""Batch command-line interface.

Subcommands:
  synth    generate a synthetic regime-switching price CSV
  prepare  turn a price CSV into per-ticker windowed dataset caches
  run      grid-search embeddings x readouts over prepared caches

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 internal error.
Each command writes a manifest.json listing input and artifact hashes so
a run can be replayed and verified.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import logging
import os
import sys

from . import __version__
from .errors import (
    ConfigError,
    IngestionError,
    InputShapeError,
    InsufficientDataError,
    QrcvolError,
)
from . import harness, pipeline

log = logging.getLogger("qrcvol")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_INTERNAL = 3


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir, command, args_dict, inputs, artifacts, seed=None):
    manifest = {
        "tool": "qrcvol",
        "version": __version__,
        "command": command,
        "args": args_dict,
        "seed": seed,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "inputs": {str(p): _sha256(p) for p in inputs},
        "artifacts": {str(p): _sha256(p) for p in artifacts},
    }
    path = os.path.join(str(out_dir), "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


class _OutputLock:
    """Guards an output directory against concurrent runs."""

    def __init__(self, out_dir):
        self.path = os.path.join(str(out_dir), ".qrcvol.lock")

    def __enter__(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise IngestionError(
                f"output directory is locked by another run ({self.path})"
            )
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        return self

    def __exit__(self, *exc):
        try:
            os.remove(self.path)
        except OSError:
            pass
        return False


def cmd_synth(args) -> int:
    regimes = harness.parse_regime_spec(args.regimes)
    series = harness.synth_regime_series(
        regimes, seed=args.seed, ticker=args.ticker, start_price=args.start_price
    )
    out_dir = os.path.dirname(os.path.abspath(args.out)) or "."
    os.makedirs(out_dir, exist_ok=True)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        fh.write("date,ticker,adj_close\n")
        for date, price in zip(series.dates, series.prices):
            fh.write(f"{date},{series.ticker},{price:.17g}\n")
    _write_manifest(
        out_dir,
        "synth",
        {"regimes": args.regimes, "seed": args.seed, "ticker": args.ticker,
         "start_price": args.start_price, "out": args.out},
        inputs=[],
        artifacts=[args.out],
        seed=args.seed,
    )
    print(f"wrote {len(series.prices)} price rows to {args.out}")
    return EXIT_OK


def cmd_prepare(args) -> int:
    if not os.path.exists(args.prices):
        raise IngestionError(f"price file not found: {args.prices}")
    tickers = args.tickers.split(",") if args.tickers else None
    series = pipeline.load_prices(args.prices, tickers=tickers)
    os.makedirs(args.out, exist_ok=True)
    with _OutputLock(args.out):
        artifacts = []
        skipped = {}
        for p in series:
            try:
                ds = pipeline.prepare_dataset(
                    p, w=args.window, lam=args.lam, stride=args.stride
                )
            except (InsufficientDataError, InputShapeError) as exc:
                skipped[p.ticker] = str(exc)
                log.warning("ticker %s skipped: %s", p.ticker, exc)
                continue
            path = os.path.join(args.out, f"{p.ticker}.dataset.csv")
            pipeline.write_dataset(ds, path)
            artifacts.append(path)
        if not artifacts:
            raise InsufficientDataError(
                "no ticker produced a dataset: " + "; ".join(skipped.values())
            )
        _write_manifest(
            args.out,
            "prepare",
            {"prices": args.prices, "window": args.window, "lambda": args.lam,
             "stride": args.stride, "tickers": args.tickers},
            inputs=[args.prices],
            artifacts=artifacts,
        )
    print(f"prepared {len(artifacts)} ticker dataset(s) in {args.out}")
    for ticker, reason in skipped.items():
        print(f"skipped {ticker}: {reason}")
    return EXIT_OK


def cmd_run(args) -> int:
    grid = harness.load_grid_config(args.config)
    if args.embeddings:
        wanted = set(args.embeddings.split(","))
        unknown = wanted - {"quantum", "classical_esn", "raw"}
        if unknown:
            raise ConfigError(f"unknown embedding kinds in filter: {sorted(unknown)}")
        grid.embeddings = [t for t in grid.embeddings if t["kind"] in wanted]
        if not grid.embeddings:
            raise ConfigError("embedding filter removed every template")
    if not os.path.isdir(args.data):
        raise IngestionError(f"data directory not found: {args.data}")
    dataset_paths = sorted(
        os.path.join(args.data, name)
        for name in os.listdir(args.data)
        if name.endswith(".dataset.csv")
    )
    if not dataset_paths:
        raise IngestionError(f"no *.dataset.csv files in {args.data}")
    datasets = {}
    for path in dataset_paths:
        ds = pipeline.read_dataset(path)
        datasets[ds.ticker] = ds
    os.makedirs(args.out, exist_ok=True)
    with _OutputLock(args.out):
        cache_dir = os.path.join(args.out, "cache")
        os.makedirs(cache_dir, exist_ok=True)
        report = harness.run_grid(datasets, grid, cache_dir=cache_dir)
        paths = harness.emit_report(report, args.out)
        _write_manifest(
            args.out,
            "run",
            {"data": args.data, "config": args.config, "embeddings": args.embeddings},
            inputs=[args.config] + dataset_paths,
            artifacts=sorted(paths.values()),
            seed=grid.seed,
        )
    print(f"evaluated {len(report.cells)} grid cell(s) over {len(datasets)} ticker(s)")
    print(f"report written to {paths['text']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrcvol",
        description="Volatility regime detection with quantum/classical reservoir embeddings",
    )
    parser.add_argument("--version", action="version", version=f"qrcvol {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic price CSV")
    p_synth.add_argument("--regimes", required=True,
                         help="schedule as len:sigma[,len:sigma]*")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--ticker", default="SYNTH")
    p_synth.add_argument("--start-price", type=float, default=100.0)
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_prep = sub.add_parser("prepare", help="build windowed dataset caches")
    p_prep.add_argument("--prices", required=True)
    p_prep.add_argument("--out", required=True)
    p_prep.add_argument("--window", type=int, default=9)
    p_prep.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p_prep.add_argument("--stride", type=int, default=1)
    p_prep.add_argument("--tickers", default=None, help="comma-separated filter")
    p_prep.set_defaults(func=cmd_prepare)

    p_run = sub.add_parser("run", help="run the embedding/readout grid")
    p_run.add_argument("--data", required=True, help="directory from `prepare`")
    p_run.add_argument("--config", required=True, help="JSON grid config")
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--embeddings", default=None,
                       help="comma-separated kind filter, e.g. raw,quantum")
    p_run.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InputShapeError, InsufficientDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (IngestionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except QrcvolError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
