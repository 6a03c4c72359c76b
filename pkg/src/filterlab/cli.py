"""Batch entry point: ``filterlab <command> --config <path> --out <path> [--seed N]``.

Exit status is 0 on success, 2 when the run completed on a model pair that
failed certification, 1 on error. Errors also produce one JSON line on
stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import reports
from .assumptions import certify
from .config import parse_config
from .errors import FilterLabError
from .experiments import (ExperimentConfig, forgetting_experiment, initial_measure,
                          moment_stability_probe, per_step_birkhoff_probe, stability_experiment,
                          sweep_experiment, telescoping_diagnostic)
from .filtering import run_filter
from .model import sample_trajectory

log = logging.getLogger("filterlab")

COMMANDS = ("check", "stability", "forgetting", "sweep", "diagnose")
OK, ERROR, UNCERTIFIED = 0, 1, 2
TELESCOPING_MAX = 30


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_path: Path
    output_path: Path
    seed: Optional[int] = None


def load_config(manifest: RunManifest) -> ExperimentConfig:
    config = parse_config(Path(manifest.config_path).read_text())
    if manifest.seed is not None:
        config = replace(config, seed=manifest.seed)
    return config


def _status(certified: bool) -> int:
    return OK if certified else UNCERTIFIED


def run_check(config: ExperimentConfig, out: Path) -> int:
    true_model, wrong_model = config.models()
    rep = certify(true_model, wrong_model, R=config.R, c=config.c)
    lines = [rep.to_text()] + [f"config.{k} = {reports._fmt(v)}" for k, v in config.echo().items()]
    reports.write_atomic(out, "\n".join(lines) + "\n")
    return _status(rep.certified)


def run_stability(config: ExperimentConfig, out: Path) -> int:
    rep = stability_experiment(config)
    reports.write_atomic(out, reports.stability_csv(rep, config))
    return _status(rep.certified)


def run_forgetting(config: ExperimentConfig, out: Path) -> int:
    rep = forgetting_experiment(config)
    reports.write_atomic(out, reports.forgetting_csv(rep, config))
    return _status(rep.certified)


def run_sweep(config: ExperimentConfig, out: Path) -> int:
    """One CSV per perturbation factor plus ``index.csv`` inside directory ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    certified = True
    for rep in sweep_experiment(config):
        name = f"stability_x{rep.factor:g}.csv"
        reports.write_atomic(out / name, reports.stability_csv(rep, config))
        rows.append((rep.factor, rep.q, rep.sup_mean_tv, "CERTIFIED" if rep.certified else "UNCERTIFIED", name))
        certified &= rep.certified
    reports.write_atomic(out / "index.csv", reports.csv_text(
        {"kind": "sweep"}, ["factor", "q", "sup_mean_tv", "status", "file"], rows))
    return _status(certified)


def run_diagnose(config: ExperimentConfig, out: Path) -> int:
    """Proof-step diagnostics on the first replica, written into directory ``out``.

    ``telescoping.csv`` covers the first ``min(horizon, 30)`` steps;
    ``probes.csv`` holds the per-step Birkhoff probe and posterior moment of
    the wrong filter over the full horizon.
    """
    out.mkdir(parents=True, exist_ok=True)
    true_model, wrong_model = config.models()
    rep = certify(true_model, wrong_model, R=config.R, c=config.c)
    mu0 = initial_measure(config.initial, config.grid)
    obs = sample_trajectory(config.true_spec(), config.horizon, config.seed, mu0).observations

    n_tel = min(config.horizon, TELESCOPING_MAX)
    tel = telescoping_diagnostic(true_model, wrong_model, mu0, obs[:n_tel])
    meta = {"kind": "telescoping", "steps": n_tel, "seed": config.seed,
            "reconstruction_error": tel.reconstruction_error,
            "difference_tv": float(np.abs(tel.difference).sum()),
            "sum_term_tv": float(tel.term_tv.sum())}
    reports.write_atomic(out / "telescoping.csv", reports.csv_text(
        meta, ["k", "term_tv"], zip(range(1, n_tel + 1), tel.term_tv)))

    trace = run_filter(wrong_model, mu0, obs, model_tag="wrong-model")
    probe = per_step_birkhoff_probe(true_model, wrong_model, trace)
    moments = moment_stability_probe(trace, rep.c, rep)
    meta = {"kind": "probes", "status": "CERTIFIED" if rep.certified else "UNCERTIFIED",
            "q": rep.q, "max_birkhoff_probe": float(probe.max()), "probe_within_q": bool(probe.max() <= rep.q + 1e-9),
            "c": rep.c, "moment_bound": moments.bound, "max_moment": moments.max_moment,
            "moment_within_bound": moments.ok, "seed": config.seed}
    reports.write_atomic(out / "probes.csv", reports.csv_text(
        meta, ["step", "birkhoff_probe", "posterior_moment"],
        zip(range(1, config.horizon + 1), probe, moments.moments[1:])))
    return _status(rep.certified)


HANDLERS = {
    "check": run_check,
    "stability": run_stability,
    "forgetting": run_forgetting,
    "sweep": run_sweep,
    "diagnose": run_diagnose,
}


def dispatch(manifest: RunManifest) -> int:
    """Run one command; never raises for expected failures, returns the exit status."""
    try:
        if manifest.command not in HANDLERS:
            raise FilterLabError(f"unknown command {manifest.command!r}")
        config = load_config(manifest)
        return HANDLERS[manifest.command](config, Path(manifest.output_path))
    except (FilterLabError, OSError, ValueError, KeyError) as exc:
        record = {"status": "error", "command": manifest.command, "kind": type(exc).__name__,
                  "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return ERROR


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="filterlab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return dispatch(RunManifest(args.command, args.config, args.out, args.seed))


if __name__ == "__main__":
    sys.exit(main())
