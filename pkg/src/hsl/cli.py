"""``hsl`` command line: config-driven verification and reproduction runs.

Usage: ``hsl <subcommand> --config <path> [--seed N] [--threads N] [--out DIR]``.
The output directory is ``--out`` if given, else ``$HSL_OUT``, else the
config's ``[output] directory``.  Every run writes ``manifest_<subcommand>.json``,
also when it fails.  Exit status: 0 when every check passes, 1 when a check
fails, 2 on configuration or input errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
import time
import traceback
from dataclasses import replace
from pathlib import Path

from . import __version__, experiments, kernels
from .config import ConfigError, ExperimentConfig, load_config

SUBCOMMANDS = ("verify-gaussian", "score-norm", "dsm-linear", "oracle-compare", "train-stylized", "sample-stylized")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.17g}"
    try:
        import numpy as np

        if isinstance(v, np.floating):
            return f"{float(v):.17g}"
        if isinstance(v, np.integer):
            return str(int(v))
    except ImportError:  # pragma: no cover
        pass
    return str(v)


def write_csv(path: Path, rows: list[dict]) -> None:
    """Header row from the first row's keys; floats with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if not rows:
            return
        keys = list(rows[0])
        w.writerow(keys)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in keys])


def _json_safe(v):
    if hasattr(v, "item") and getattr(v, "ndim", 1) == 0:  # numpy scalar
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return v


def format_check(c: dict) -> str:
    """One console line per check: status, name, measured value or note."""
    tag = "N/A" if c["passed"] is None else c["status"].upper()
    line = f"{tag:<5} {c['name']}"
    if isinstance(c["measured"], float):
        line += f"  measured={c['measured']:.6g}"
        if isinstance(c["tolerance"], float):
            line += f" tol={c['tolerance']:.6g}"
    if c["note"]:
        line += f"  ({c['note']})"
    return line


def resolve_out(args, cfg: ExperimentConfig | None) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get("HSL_OUT")
    if env:
        return Path(env)
    return Path(cfg.output.directory if cfg is not None else ExperimentConfig().output.directory)


def _checkpoint_path(cfg: ExperimentConfig, out: Path) -> Path:
    p = Path(cfg.train.checkpoint)
    return p if p.is_absolute() else out / p


def _run(sub: str, cfg: ExperimentConfig, out: Path, threads: int):
    if sub == "verify-gaussian":
        return experiments.run_verify_gaussian(cfg, threads)
    if sub == "score-norm":
        return experiments.run_score_norm(cfg, threads)
    if sub == "dsm-linear":
        return experiments.run_dsm_linear(cfg, threads)
    if sub == "oracle-compare":
        return experiments.run_oracle_compare(cfg, threads)
    if sub == "train-stylized":
        return experiments.run_train_stylized(cfg, _checkpoint_path(cfg, out), out / "loss.csv")
    if sub == "sample-stylized":
        ckpt = _checkpoint_path(cfg, out)
        if not ckpt.exists():
            raise ConfigError(f"checkpoint not found: {ckpt} (run train-stylized first)")
        return experiments.run_sample_stylized(cfg, ckpt, threads)
    raise ConfigError(f"unknown subcommand {sub}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hsl", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = ap.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = subs.add_parser(name)
        sp.add_argument("--config", required=True, help="INI configuration file")
        sp.add_argument("--seed", type=int, default=None, help="override the configured seed")
        sp.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
        sp.add_argument("--out", default=None, help="output directory")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    sub = args.subcommand
    start = time.time()
    clock = time.perf_counter()
    manifest = {
        "subcommand": sub,
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "python": platform.python_version(),
        "config_path": str(args.config),
        "config_hash": None,
        "seed": args.seed,
        "threads": args.threads,
        "started_unix": start,
        "status": "error",
        "checks": [],
        "files": [],
    }
    cfg = None
    code = 2
    out = resolve_out(args, None)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        out = resolve_out(args, cfg)
        out.mkdir(parents=True, exist_ok=True)
        manifest.update(config_hash=cfg.digest(), seed=cfg.seed, effective_config=cfg.to_dict())
        res = _run(sub, cfg, out, args.threads)
        for name, rows in res.tables.items():
            if name.startswith("_"):
                continue
            path = out / f"{name}.csv"
            write_csv(path, rows)
            manifest["files"].append(str(path))
        manifest["files"].extend(res.files)
        manifest["checks"] = [c.to_dict() for c in res.checks]
        code = 0 if res.ok else 1
        manifest["status"] = "pass" if res.ok else "fail"
    except ConfigError as err:
        manifest["error"] = str(err)
        print(f"hsl {sub}: {err}", file=sys.stderr)
    except Exception as err:  # record partial results, then report
        manifest["error"] = f"{type(err).__name__}: {err}"
        manifest["traceback"] = traceback.format_exc()
        print(f"hsl {sub}: {type(err).__name__}: {err}", file=sys.stderr)
        code = 1
    finally:
        manifest["wall_clock_seconds"] = time.perf_counter() - clock
        try:
            out.mkdir(parents=True, exist_ok=True)
            with open(out / f"manifest_{sub.replace('-', '_')}.json", "w") as fh:
                json.dump(_json_safe(manifest), fh, indent=2, sort_keys=True)
        except OSError as err:
            print(f"hsl {sub}: could not write manifest: {err}", file=sys.stderr)
    for c in manifest["checks"]:
        print(format_check(c))
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
