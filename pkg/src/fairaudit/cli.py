"""``fairaudit`` command line: generate, ingest, audit, report.

Exit codes: 0 success, 1 validation error, 2 runtime/data error, 3 I/O error.
Progress goes to stderr; data goes only to files (``ingest`` prints its JSON
report to stdout).
"""
from __future__ import annotations

import argparse
import json
import logging
import platform
import shutil
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, core, runner, synth
from .errors import ConfigError, FairAuditError, ParseError, SchemaError

log = logging.getLogger("fairaudit")

EXIT_OK, EXIT_VALIDATION, EXIT_DATA, EXIT_IO = 0, 1, 2, 3


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None


def _prepare_out(out, force):
    out = Path(out)
    if out.exists() and any(out.iterdir()):
        if not force:
            raise ConfigError(f"output directory {out} is not empty; pass --force to overwrite")
        shutil.rmtree(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args):
    if args.config:
        raw = _read_json(args.config)
        data = raw.get("data", raw) if isinstance(raw, dict) else None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        if "csv" in data:
            raise ConfigError("generate needs a 'synth' or 'preset' data source")
        source = runner.DataSource.from_dict(data)
        cfg = source.synth
    elif args.preset:
        cfg = synth.preset(args.preset)
    else:
        raise ConfigError("generate needs --config or --preset")
    if args.seed is not None:
        cfg = synth.SynthConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    if args.n_rows is not None:
        cfg = synth.SynthConfig.from_dict({**cfg.to_dict(), "n_rows": args.n_rows})
    out = _prepare_out(args.out, args.force)
    ds = synth.make_dataset(cfg)
    core.save_csv(ds, out / "data.csv", out / "schema.json")
    with open(out / "synth_config.json", "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)
        fh.write("\n")
    print(f"wrote {ds.n_rows} rows to {out / 'data.csv'}", file=sys.stderr)
    return EXIT_OK


def cmd_ingest(args):
    schema = core.load_schema(args.schema)
    ds, report = core.ingest_csv(args.csv, schema)
    dropped = 0
    if args.drop_sparse is not None:
        ds, dropped = core.drop_sparse_rows(ds, args.drop_sparse)
    prof = core.missing_profile(ds)
    out = {
        "rows_read": report.n_read,
        "rows_rejected": report.n_rejected,
        "rejected_rows": list(report.rejected_rows),
        "rows_dropped_sparse": dropped,
        "rows": ds.n_rows,
        "features": ds.n_features,
        "complete_case_rows": int((~ds.mask.any(axis=1)).sum()),
        "group_counts": {g: {"count": c, "share": s} for g, (c, s) in core.group_counts(ds).items()},
        "missing_fraction": {n: float(f) for n, f in zip(prof.column_names, prof.column_fraction) if f > 0},
        "positive_rate": float(ds.labels.mean()) if ds.n_rows else None,
    }
    json.dump(out, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


def _progress(done, total, label):
    if done == total or done % max(1, total // 20) == 0:
        print(f"[{done}/{total}] {label}", file=sys.stderr, flush=True)


def cmd_audit(args):
    cfg = runner.load_config(args.config)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.trials is not None:
        cfg.trials = args.trials
    if args.out is not None:
        cfg.out_dir = args.out
    if args.scenario:
        keep = [s for s in cfg.scenarios if s.label in args.scenario or s.kind in args.scenario]
        missing = set(args.scenario) - {s.label for s in keep} - {s.kind for s in keep}
        if missing:
            raise ConfigError(f"--scenario names not in config: {sorted(missing)}")
        cfg.scenarios = keep
    cfg.__post_init__()
    out = _prepare_out(cfg.out_dir, args.force)
    t0 = time.perf_counter()
    ds = cfg.data.load()
    print(f"data: {ds.n_rows} rows, {ds.n_features} features, groups {list(ds.group_names)}",
          file=sys.stderr)
    records = runner.run_audit(cfg, ds, progress=_progress)
    summary = runner.summarize(records)
    runner.emit(records, summary, out)
    n_err = sum(r.metric == "error" for r in records)
    manifest = {
        "config": cfg.to_dict(),
        "config_sha256": runner.config_hash(cfg),
        "versions": {"fairaudit": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "n_records": len(records),
        "n_errored_cells": n_err,
        "wall_time_s": round(time.perf_counter() - t0, 3),
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    print(f"wrote {len(records)} records to {out} ({n_err} errored cells)", file=sys.stderr)
    return EXIT_OK


def cmd_report(args):
    records = runner.read_records_csv(args.records)
    out = Path(args.out)
    if out.exists() and (out / "summary.csv").exists() and not args.force:
        raise ConfigError(f"{out} already holds a summary; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    runner.emit_summary(runner.summarize(records), out)
    print(f"summarized {len(records)} records into {out}", file=sys.stderr)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="fairaudit", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset (CSV + schema)")
    g.add_argument("--config", help="JSON with a 'data' section (synth or preset)")
    g.add_argument("--preset", choices=sorted(synth.PRESETS))
    g.add_argument("--seed", type=_u64)
    g.add_argument("--n-rows", type=int)
    g.add_argument("--out", required=True)
    g.add_argument("--force", action="store_true")
    g.set_defaults(func=cmd_generate)

    i = sub.add_parser("ingest", help="validate a CSV against a schema and print a report")
    i.add_argument("csv")
    i.add_argument("schema")
    i.add_argument("--drop-sparse", type=float, metavar="THRESHOLD")
    i.set_defaults(func=cmd_ingest)

    a = sub.add_parser("audit", help="run the configured audit")
    a.add_argument("--config", required=True)
    a.add_argument("--seed", type=_u64, help="override run.master_seed")
    a.add_argument("--trials", type=_positive, help="override run.trials")
    a.add_argument("--out", help="override run.out_dir")
    a.add_argument("--scenario", action="append", help="keep only this scenario (repeatable)")
    a.add_argument("--force", action="store_true")
    a.set_defaults(func=cmd_audit)

    r = sub.add_parser("report", help="summarize an existing records.csv")
    r.add_argument("records")
    r.add_argument("--out", required=True)
    r.add_argument("--force", action="store_true")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ParseError, FairAuditError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
