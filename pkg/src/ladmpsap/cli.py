"""Batch experiment runner.

Usage::

    ladmpsap run CONFIG.yaml [--format csv|json|table] [--out PATH] [--seed N] [--max-iter N]

The config is a YAML mapping; see ``configs/`` in the repository for one
file per experiment.  Log verbosity comes from the ``LADMPSAP_LOG_LEVEL``
environment variable (default ``WARNING``).
"""

from __future__ import annotations

import argparse
import csv
import importlib
import io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import problems as P
from .core.config import PenaltySchedule, SolverConfig, Status, Variant
from .core.problem import Problem
from .core.solver import solve
from .exceptions import InvalidParameterError, LadmpsapError
from .oracle import long_run_reference

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "load_config",
    "run_experiment",
    "emit_report",
    "parse_csv",
    "REPORT_SCHEMA",
    "main",
]

log = logging.getLogger(__name__)

EXPERIMENTS = ("latlrr", "nmc", "logistic", "divergence", "custom")
FORMATS = ("csv", "json", "table")
SIG_DIGITS = 6

DEFAULT_VARIANTS = {
    "latlrr": ["ladmpsap", "ladmps"],
    "nmc": ["practical"],
    "logistic": ["proximal"],
    "divergence": ["naive", "ladmpsap"],
    "custom": ["ladmpsap"],
}
REFERENCE_VARIANT = {
    "latlrr": "ladmpsap",
    "nmc": "practical",
    "logistic": "proximal",
    "divergence": "ladmpsap",
    "custom": "ladmpsap",
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ladmpsap experiment report",
    "type": "object",
    "required": ["experiment", "seed", "rows"],
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "seed": {"type": "integer"},
        "rows": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["variant", "status", "iterations", "time", "rel_errors", "metrics"],
                "additionalProperties": False,
                "properties": {
                    "variant": {"type": "string"},
                    "status": {"enum": [s.value for s in Status]},
                    "iterations": {"type": "integer", "minimum": 0},
                    "time": {"type": "number", "minimum": 0},
                    "rel_errors": {"type": "object", "additionalProperties": {"type": ["number", "null"]}},
                    "metrics": {"type": "object", "additionalProperties": {"type": ["number", "null"]}},
                },
            },
        },
    },
}


def _sig(v):
    """Round to ``SIG_DIGITS`` significant digits so every format agrees bit for bit."""
    if v is None:
        return None
    v = float(v)
    if not math.isfinite(v):
        return v
    return float(f"{v:.{SIG_DIGITS}g}")


@dataclass
class ResultRow:
    """One solver run: the columns of a comparison table.

    `rel_errors` maps block names to ``||x_i - x_i*|| / ||x_i*||`` against the
    long-run reference; `metrics` holds experiment-specific scalars (FA and
    error against ground truth for NMC, support recovery for logistic
    regression).  Floats are stored rounded to six significant digits.
    """

    variant: str
    status: str
    iterations: int
    time: float
    rel_errors: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.status = Status(self.status).value
        self.iterations = int(self.iterations)
        self.time = _sig(self.time)
        self.rel_errors = {k: _sig(v) for k, v in self.rel_errors.items()}
        self.metrics = {k: _sig(v) for k, v in self.metrics.items()}

    def as_dict(self) -> dict:
        return {
            "variant": self.variant,
            "status": self.status,
            "iterations": self.iterations,
            "time": self.time,
            "rel_errors": dict(self.rel_errors),
            "metrics": dict(self.metrics),
        }


@dataclass
class ExperimentConfig:
    """Parsed experiment file.

    Attributes
    ----------
    experiment : str
        One of ``latlrr``, ``nmc``, ``logistic``, ``divergence``, ``custom``.
    spec : dict
        Keyword arguments of the experiment's spec (or of the custom factory).
    variants : list of str
        Solver variants to compare, each producing one row.
    eps1, eps2 : float
        Stopping tolerances.
    solver : dict
        Extra :class:`SolverConfig` / :class:`PenaltySchedule` fields.
        ``beta0: scaled`` selects the data-scaled initial penalty of the
        latent LRR setup.
    reference : dict
        ``enabled`` (default true), ``max_iter`` and ``rho0`` of the long-run
        reference, ``variant`` to override the default per experiment.
    factory : str
        ``module:function`` returning a :class:`Problem` (custom only).
    """

    experiment: str
    spec: dict = field(default_factory=dict)
    variants: list = field(default_factory=list)
    eps1: float = 1e-3
    eps2: float = 1e-4
    seed: int = 0
    solver: dict = field(default_factory=dict)
    reference: dict = field(default_factory=dict)
    factory: str | None = None
    output: str | None = None
    format: str = "table"
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise InvalidParameterError(
                f"unknown experiment {self.experiment!r}; expected one of {', '.join(EXPERIMENTS)}"
            )
        if not self.variants:
            self.variants = list(DEFAULT_VARIANTS[self.experiment])
        for v in self.variants:
            Variant(v)
        if self.eps1 <= 0 or self.eps2 <= 0:
            raise InvalidParameterError("tolerances must be positive")
        if self.format not in FORMATS:
            raise InvalidParameterError(f"unknown format {self.format!r}")
        if self.experiment == "custom" and not self.factory:
            raise InvalidParameterError("custom experiments need a 'factory: module:function' entry")
        self.seed = int(self.seed)


def load_config(path) -> ExperimentConfig:
    """Read a YAML experiment file."""
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise InvalidParameterError(f"{path}: top level must be a mapping")
    raw = dict(raw)
    tol = raw.pop("tolerances", {}) or {}
    out = raw.pop("output", {}) or {}
    if isinstance(out, dict):
        raw.setdefault("output", out.get("path"))
        raw.setdefault("format", out.get("format", "table"))
    else:
        raw["output"] = out
    for key in ("eps1", "eps2"):
        if key in tol:
            raw[key] = float(tol[key])
    try:
        return ExperimentConfig(**raw)
    except TypeError as exc:
        raise InvalidParameterError(f"{path}: {exc}") from exc


# -- problem construction ---------------------------------------------------


@dataclass
class _Instance:
    problem: Problem
    names: list
    beta0: float | None = None
    truth: np.ndarray | None = None
    support: np.ndarray | None = None


def _build(cfg: ExperimentConfig) -> _Instance:
    spec = dict(cfg.spec)
    if cfg.experiment == "latlrr":
        s = P.LatentLrrSpec(seed=cfg.seed, **spec)
        X = P.gen_latent_lrr_data(s)
        prob = P.build_latent_lrr(X, s.mu)
        beta0 = float(np.linalg.norm(X, 2)) * min(X.shape) * cfg.eps2
        return _Instance(prob, ["Z", "L", "E"], beta0=beta0)
    if cfg.experiment == "nmc":
        s = P.NmcSpec(seed=cfg.seed, **spec)
        X0, b, omega = P.gen_nmc_data(s)
        return _Instance(P.build_nmc(b, omega, (s.m, s.n), s.mu), ["X", "E"], truth=X0)
    if cfg.experiment == "logistic":
        s = P.GroupLogisticSpec(seed=cfg.seed, **spec)
        X, y, support = P.gen_group_logistic_data(s)
        prob = P.build_group_logistic(X, y, P.overlapping_groups(s.t), s.mu)
        return _Instance(prob, ["w", "z"], support=support)
    if cfg.experiment == "divergence":
        spec.setdefault("n", 5)
        spec.setdefault("m", 40)
        spec.setdefault("d", 20)
        prob = P.build_parallel_bp(seed=cfg.seed, **spec)
        return _Instance(prob, [b.name for b in prob.blocks])
    module, _, func = cfg.factory.partition(":")
    factory = getattr(importlib.import_module(module), func)
    prob = factory(seed=cfg.seed, **spec)
    return _Instance(prob, [b.name or f"x{i}" for i, b in enumerate(prob.blocks)])


def _solver_config(cfg: ExperimentConfig, inst: _Instance, variant: str) -> SolverConfig:
    opts = dict(cfg.solver)
    sched_keys = ("beta0", "beta_max", "rho0", "alpha")
    sched = {k: opts.pop(k) for k in sched_keys if k in opts}
    if sched.get("beta0") == "scaled":
        sched["beta0"] = inst.beta0
    elif "beta0" not in sched and inst.beta0 is not None:
        sched["beta0"] = inst.beta0
    if sched.get("beta_max") in ("inf", "infinity"):
        sched["beta_max"] = math.inf
    if cfg.experiment == "latlrr":
        opts.setdefault("stopping_residual", "plain")
    return SolverConfig(
        schedule=PenaltySchedule(eps2=cfg.eps2, **sched),
        eps1=cfg.eps1,
        variant=Variant(variant),
        **opts,
    )


def _rel(a, b) -> float:
    den = float(np.linalg.norm(b))
    return float(np.linalg.norm(a - b)) / (den if den > 0 else 1.0)


def _run_variant(cfg: ExperimentConfig, inst: _Instance, variant: str, reference) -> ResultRow:
    t0 = time.perf_counter()
    try:
        report = solve(inst.problem, _solver_config(cfg, inst, variant))
    except LadmpsapError as exc:
        log.error("variant %s failed: %s", variant, exc)
        return ResultRow(variant, Status.NUMERIC_ERROR, 0, time.perf_counter() - t0)
    rel = {}
    if reference is not None:
        rel = {name: _rel(x, xs) for name, x, xs in zip(inst.names, report.x, reference.x_star)}
    metrics = {"feasibility": report.feasibility, "beta": report.beta}
    if inst.truth is not None:
        metrics["fa"] = P.fa_metric(report.x[0], inst.truth)
        metrics["truth_error"] = _rel(report.x[0], inst.truth)
    if inst.support is not None:
        w = report.x[0][:-1, 0]
        found = np.flatnonzero(np.abs(w) > 1e-3)
        metrics["support_recovered"] = float(np.array_equal(found, inst.support))
        metrics["support_size"] = float(found.size)
    return ResultRow(variant, report.status, report.iterations, report.elapsed, rel, metrics)


def run_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    """Build the instance, compute the long-run reference, run every variant.

    A variant that fails numerically still yields a row carrying its status.
    Everything except the time column is a deterministic function of the
    config.
    """
    inst = _build(cfg)
    reference = None
    ref_opts = dict(cfg.reference)
    if ref_opts.pop("enabled", True):
        ref_variant = ref_opts.pop("variant", REFERENCE_VARIANT[cfg.experiment])
        try:
            reference = long_run_reference(
                inst.problem, _solver_config(cfg, inst, ref_variant), **ref_opts
            )
        except LadmpsapError as exc:
            log.warning("no reference: %s", exc)

    def one(v):
        return _run_variant(cfg, inst, v, reference)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(one, cfg.variants))
    return [one(v) for v in cfg.variants]


# -- reporting --------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    return f"{v:.{SIG_DIGITS}g}"


def _columns(rows):
    err_keys = sorted({k for r in rows for k in r.rel_errors})
    met_keys = sorted({k for r in rows for k in r.metrics})
    return err_keys, met_keys


def _csv_text(rows) -> str:
    err_keys, met_keys = _columns(rows)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["variant", "status", "iterations", "time"]
                + [f"relerr:{k}" for k in err_keys] + [f"metric:{k}" for k in met_keys])
    for r in rows:
        wr.writerow([r.variant, r.status, r.iterations, _fmt(r.time)]
                    + [_fmt(r.rel_errors.get(k)) for k in err_keys]
                    + [_fmt(r.metrics.get(k)) for k in met_keys])
    return buf.getvalue()


def parse_csv(text: str) -> list[ResultRow]:
    """Inverse of the csv report."""
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        rel, met = {}, {}
        for key, val in rec.items():
            if val == "":
                continue
            if key.startswith("relerr:"):
                rel[key[7:]] = float(val)
            elif key.startswith("metric:"):
                met[key[7:]] = float(val)
        rows.append(ResultRow(rec["variant"], rec["status"], int(rec["iterations"]),
                              float(rec["time"]), rel, met))
    return rows


def _table_text(rows) -> str:
    err_keys, met_keys = _columns(rows)
    header = ["Method", "#Iter.", "Time (s)"] + [f"RelErr {k}" for k in err_keys] + met_keys + ["Status"]
    body = [[r.variant, str(r.iterations), _fmt(r.time)]
            + [_fmt(r.rel_errors.get(k)) for k in err_keys]
            + [_fmt(r.metrics.get(k)) for k in met_keys] + [r.status] for r in rows]
    widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(header)]
    line = lambda cells: " | ".join(c.rjust(w) for c, w in zip(cells, widths))  # noqa: E731
    sep = "-+-".join("-" * w for w in widths)
    return "\n".join([line(header), sep] + [line(b) for b in body]) + "\n"


def render_report(rows, fmt: str, experiment: str = "custom", seed: int = 0) -> str:
    if fmt == "csv":
        return _csv_text(rows)
    if fmt == "json":
        doc = {"experiment": experiment, "seed": int(seed), "rows": [r.as_dict() for r in rows]}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if fmt == "table":
        return _table_text(rows)
    raise InvalidParameterError(f"unknown format {fmt!r}")


def emit_report(rows, fmt: str = "table", path=None, experiment: str = "custom", seed: int = 0) -> str:
    """Write the report to `path` (stdout when ``None``) and return the text.

    Raises
    ------
    OSError
        If `path` cannot be written.
    """
    rows = list(rows)
    if not rows:
        raise InvalidParameterError("nothing to report")
    text = render_report(rows, fmt, experiment, seed)
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ladmpsap", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment file")
    run.add_argument("config", help="YAML experiment file")
    run.add_argument("--format", choices=FORMATS, help="report format (overrides the file)")
    run.add_argument("--out", help="output path (default: stdout)")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--max-iter", type=int, help="override the iteration cap")
    return ap


def main(argv=None) -> int:
    level = os.environ.get("LADMPSAP_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.max_iter is not None:
            cfg.solver = {**cfg.solver, "max_iter": args.max_iter}
        rows = run_experiment(cfg)
    except (OSError, yaml.YAMLError, LadmpsapError, ValueError) as exc:
        print(f"ladmpsap: error: {exc}", file=sys.stderr)
        return 2
    fmt = args.format or cfg.format
    out = args.out if args.out is not None else cfg.output
    try:
        emit_report(rows, fmt, out, cfg.experiment, cfg.seed)
    except OSError as exc:
        print(f"ladmpsap: cannot write report: {exc}", file=sys.stderr)
        return 2
    produced = {r.variant for r in rows}
    return 0 if all(v in produced for v in cfg.variants) else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
