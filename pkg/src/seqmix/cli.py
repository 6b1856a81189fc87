"""Command-line front end.

Commands: analyze, simulate-error, simulate-ess, continuous, overshoot.
Flags mirror the experiment-config fields; a --config JSON file
overrides flags.  Output is CSV (6 significant digits) or JSON (full
precision); both carry a fingerprint of the resolved configuration, so
a run is reproducible from its output header alone.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from . import mixing, montecarlo, renewal
from .errors import ConfigError, SeqmixError
from .models import GaussianMeanModel, exponential_rate_family, kl_numbers

SEED_ENV_VAR = "SEQMIX_SEED"

_MIXING_KINDS = ("optimal", "uniform", "kl", "inv_delta", "expk_over_delta", "explicit")


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved configuration of one CLI invocation (round-trips via dicts)."""

    command: str
    model_kind: str = "gaussian-mean"
    means: Optional[tuple] = None
    thetas: Optional[tuple] = None
    interval: Optional[tuple] = None
    grid_size: int = 128
    mixing: tuple = ("optimal",)
    explicit_weights: Optional[tuple] = None
    alpha: tuple = (1e-4,)
    reps: int = 100_000
    seed: int = 0
    max_n: Optional[int] = None
    workers: int = 1
    fmt: str = "csv"
    tol: float = 1e-8
    log_threshold: Optional[float] = None
    density: str = "optimal"

    def __post_init__(self):
        for name in ("means", "thetas", "interval", "alpha", "mixing", "explicit_weights"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, tuple(val))
        if self.fmt not in ("csv", "json"):
            raise ConfigError(f"unknown output format {self.fmt!r}")
        if int(self.reps) < 1:
            raise ConfigError("reps must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        for a in self.alpha:
            if not 0.0 < a < 1.0:
                raise ConfigError(f"alpha={a} must lie in (0, 1)")
        for kind in self.mixing:
            if kind not in _MIXING_KINDS:
                raise ConfigError(f"unknown mixing kind {kind!r}")
        if "explicit" in self.mixing and self.explicit_weights is None:
            raise ConfigError("mixing kind 'explicit' requires weights")
        if self.model_kind not in ("gaussian-mean", "exp-exponential"):
            raise ConfigError(f"unknown model kind {self.model_kind!r}")
        if self.density not in ("optimal", "uniform"):
            raise ConfigError(f"unknown density kind {self.density!r}")
        if not self.tol > 0.0:
            raise ConfigError("tol must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        for key, val in d.items():
            if isinstance(val, tuple):
                d[key] = list(val)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


# --- model and analytics assembly ---------------------------------------------


def build_model(cfg: ExperimentConfig):
    if cfg.model_kind == "gaussian-mean":
        if not cfg.means:
            raise ConfigError("gaussian-mean model requires --means")
        return GaussianMeanModel(means=cfg.means)
    if not cfg.thetas:
        raise ConfigError("exp-exponential model requires --theta")
    return exponential_rate_family().to_alternatives(cfg.thetas)


def analytic_summaries(cfg: ExperimentConfig, model) -> tuple[np.ndarray, np.ndarray]:
    """Per-alternative (kappa, delta) via the model's analytic route."""
    if cfg.model_kind == "gaussian-mean":
        kap = np.array([renewal.gaussian_kappa(m, cfg.tol) for m in cfg.means])
        dl = np.array([renewal.gaussian_delta(m, cfg.tol) for m in cfg.means])
    else:
        summaries = [renewal.exp_family_exponential_summary(t) for t in cfg.thetas]
        kap = np.array([s.kappa for s in summaries])
        dl = np.array([s.delta for s in summaries])
    return kap, dl


def resolve_mixing(kind: str, cfg: ExperimentConfig, info, kap, dl) -> mixing.MixingDistribution:
    if kind == "optimal":
        return mixing.optimal_mixing(kap)
    if kind == "explicit":
        return mixing.MixingDistribution(np.asarray(cfg.explicit_weights, dtype=float))
    return mixing.named_mixing(kind, info=info, deltas=dl, kappas=kap)


# --- output ---------------------------------------------------------------------


def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def write_output(command: str, cfg: ExperimentConfig, columns, rows, notes, out) -> None:
    if cfg.fmt == "json":
        doc = {
            "command": command,
            "fingerprint": cfg.fingerprint(),
            "config": cfg.to_dict(),
            "notes": list(notes),
            "rows": [dict(zip(columns, r)) for r in rows],
        }
        json.dump(doc, out, indent=2)
        out.write("\n")
        return
    out.write(f"# seqmix {command}\n")
    out.write(f"# config {cfg.fingerprint()}\n")
    for note in notes:
        out.write(f"# note {note}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt_cell(v) for v in r])


# --- commands -------------------------------------------------------------------


def cmd_analyze(cfg: ExperimentConfig, out) -> None:
    model = build_model(cfg)
    kap, dl = analytic_summaries(cfg, model)
    info = kl_numbers(model).info
    mixes = {
        "p_optimal": mixing.optimal_mixing(kap),
        "p_kl": mixing.named_mixing("kl", info=info),
        "p_inv_delta": mixing.named_mixing("inv_delta", info=info, deltas=dl),
        "p_expk_over_delta": mixing.named_mixing(
            "expk_over_delta", info=info, deltas=dl, kappas=kap
        ),
        "p_uniform": mixing.named_mixing("uniform", info=info),
    }
    notes = [
        "p_expk_over_delta lists the raw e^kappa/delta scores normalized by their "
        "sum, so the column is a probability vector."
    ]
    columns = ["alternative_index", "info", "kappa", "delta", *mixes.keys()]
    rows = [
        [i, float(info[i]), float(kap[i]), float(dl[i])]
        + [float(m.weights[i]) for m in mixes.values()]
        for i in range(model.k)
    ]
    write_output("analyze", cfg, columns, rows, notes, out)


def cmd_performance(cfg: ExperimentConfig, out) -> None:
    """PerformanceReport rows for every requested (mixing, alpha)."""
    model = build_model(cfg)
    kap, dl = analytic_summaries(cfg, model)
    info = kl_numbers(model).info
    columns = [
        "mixing", "alpha", "alternative_index", "kappa", "delta", "weight",
        "ess_approx_nats", "max_kl_approx", "lower_bound", "loss",
    ]
    rows = []
    for kind in cfg.mixing:
        p = resolve_mixing(kind, cfg, info, kap, dl)
        for alpha in cfg.alpha:
            report = mixing.performance_report(p, alpha, kap, dl)
            for i in range(model.k):
                rows.append(
                    [
                        kind, alpha, i, float(kap[i]), float(dl[i]), float(p.weights[i]),
                        float(report.per_alternative[i]), report.max_approx,
                        report.lower_bound, report.loss,
                    ]
                )
    write_output("analyze", cfg, columns, rows, [], out)


def cmd_simulate_error(cfg: ExperimentConfig, out) -> None:
    model = build_model(cfg)
    kap, dl = analytic_summaries(cfg, model)
    info = kl_numbers(model).info
    columns = [
        "mixing", "alpha", "threshold", "estimate", "stderr", "bound_one_over_A",
        "reps", "truncated",
    ]
    rows = []
    for kind in cfg.mixing:
        p = resolve_mixing(kind, cfg, info, kap, dl)
        for alpha in cfg.alpha:
            a_thresh = mixing.threshold_for_alpha(p, dl, alpha)
            sim = montecarlo.SimConfig(
                reps=cfg.reps, seed=cfg.seed, max_n=cfg.max_n, alpha=alpha,
                workers=cfg.workers,
            )
            est = montecarlo.estimate_error_probability(model, p, math.log(a_thresh), sim)
            rows.append(
                [kind, alpha, a_thresh, est.mean, est.stderr, 1.0 / a_thresh,
                 est.reps, est.truncated]
            )
    write_output("simulate-error", cfg, columns, rows, [], out)


def cmd_simulate_ess(cfg: ExperimentConfig, out) -> None:
    model = build_model(cfg)
    kap, dl = analytic_summaries(cfg, model)
    info = kl_numbers(model).info
    columns = ["mixing", "alpha", "quantity", "i", "mc_mean", "mc_stderr", "reps",
               "truncated", "approx_value"]
    rows = []
    for kind in cfg.mixing:
        p = resolve_mixing(kind, cfg, info, kap, dl)
        for alpha in cfg.alpha:
            a_thresh = mixing.threshold_for_alpha(p, dl, alpha)
            sim = montecarlo.SimConfig(
                reps=cfg.reps, seed=cfg.seed, max_n=cfg.max_n, alpha=alpha,
                workers=cfg.workers,
            )
            mc = montecarlo.estimate_max_kl(model, p, math.log(a_thresh), sim)
            report = mixing.performance_report(p, alpha, kap, dl)
            for i, est in enumerate(mc.per_alternative):
                rows.append(
                    [kind, alpha, "kl_info", i, float(mc.info[i] * est.mean),
                     float(mc.info[i] * est.stderr), est.reps, est.truncated,
                     float(report.per_alternative[i])]
                )
            rows.append(
                [kind, alpha, "max_kl_info", mc.argmax, mc.value, mc.stderr,
                 cfg.reps, sum(e.truncated for e in mc.per_alternative),
                 report.max_approx]
            )
            rows.append([kind, alpha, "lower_bound", None, None, None, None, None,
                         report.lower_bound])
            rows.append([kind, alpha, "loss", None, None, None, None, None,
                         report.loss])
    write_output("simulate-ess", cfg, columns, rows, [], out)


def cmd_continuous(cfg: ExperimentConfig, out) -> None:
    if not cfg.interval:
        raise ConfigError("continuous requires --interval lo,hi")
    family = exponential_rate_family()

    def kappa_fn(t):
        return renewal.exp_family_exponential_summary(t).kappa

    def delta_fn(t):
        return renewal.exp_family_exponential_summary(t).delta

    if cfg.density == "optimal":
        g = mixing.optimal_density(family, cfg.interval, cfg.grid_size, kappa_fn)
        notes = [f"normalizer {g.normalizer!r}"]
    else:
        g = mixing.uniform_density(cfg.interval, cfg.grid_size)
        notes = ["uniform reference density"]
    alpha = cfg.alpha[0]
    columns = ["theta", "density", "ess_approx_nats"]
    rows = []
    for theta in g.grid:
        val = mixing.ess_approx_continuous(theta, g, alpha, kappa_fn, delta_fn, family)
        rows.append([float(theta), float(g.value_at(theta)), float(val)])
    write_output("continuous", cfg, columns, rows, notes, out)


def cmd_overshoot(cfg: ExperimentConfig, out) -> None:
    model = build_model(cfg)
    kap, dl = analytic_summaries(cfg, model)
    info = kl_numbers(model).info
    method = "series" if cfg.model_kind == "gaussian-mean" else "closed-form"
    columns = ["i", "kappa", "delta", "method", "stderr_kappa", "stderr_delta"]
    rows = []
    for i in range(model.k):
        rows.append([i, float(kap[i]), float(dl[i]), method, 0.0, 0.0])
        mc = renewal.mc_overshoot_summary(
            model, i, log_threshold=cfg.log_threshold, reps=cfg.reps, seed=cfg.seed,
            max_n=cfg.max_n,
        )
        rows.append([i, mc.kappa, mc.delta, mc.method, mc.stderr_kappa, mc.stderr_delta])
    write_output("overshoot", cfg, columns, rows, [], out)


# --- argument parsing -----------------------------------------------------------


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v != "")
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqmix",
        description="One-sided mixture-based sequential tests: design and simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("analyze", "per-alternative quantities and mixing distributions"),
        ("simulate-error", "importance-sampling error probabilities"),
        ("simulate-ess", "expected sample sizes and maximal KL information"),
        ("continuous", "optimal continuous mixing density on an interval"),
        ("overshoot", "overshoot summaries: analytic and Monte Carlo"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="JSON config file; overrides flags")
        p.add_argument("--means", type=_floats, help="gaussian-mean model: comma list of means")
        p.add_argument("--theta", type=_floats, dest="thetas",
                       help="exp-exponential model: comma list of parameters in (0,1)")
        p.add_argument("--interval", type=_floats, help="parameter interval lo,hi")
        p.add_argument("--grid-size", type=int, default=None)
        p.add_argument("--mixing", default=None,
                       help=f"comma list from {_MIXING_KINDS}")
        p.add_argument("--weights", type=_floats, default=None,
                       help="weights for an explicit mixing")
        p.add_argument("--alpha", type=_floats, default=None, help="comma list of error levels")
        p.add_argument("--reps", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--max-n", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--format", dest="fmt", choices=("csv", "json"), default=None)
        p.add_argument("--tol", type=float, default=None, help="series truncation tolerance")
        p.add_argument("--log-threshold", type=float, default=None)
        p.add_argument("--density", choices=("optimal", "uniform"), default=None)
        p.add_argument("--performance", action="store_true",
                       help="analyze: emit performance-report rows for --alpha")
        p.add_argument("--output", default=None, help="output path (default stdout)")
    return parser


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    values = {
        "command": args.command,
        "means": args.means,
        "thetas": args.thetas,
        "interval": args.interval,
        "grid_size": args.grid_size,
        "mixing": tuple(args.mixing.split(",")) if args.mixing else None,
        "explicit_weights": args.weights,
        "alpha": args.alpha,
        "reps": args.reps,
        "seed": args.seed,
        "max_n": args.max_n,
        "workers": args.workers,
        "fmt": args.fmt,
        "tol": args.tol,
        "log_threshold": args.log_threshold,
        "density": args.density,
    }
    if args.thetas and not args.means:
        values["model_kind"] = "exp-exponential"
    if args.config:
        try:
            with open(args.config) as fh:
                file_values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        if "model" in file_values:
            model = file_values.pop("model")
            values["model_kind"] = model.get("kind", values.get("model_kind", "gaussian-mean"))
            if "means" in model:
                values["means"] = model["means"]
            if "theta" in model:
                values["thetas"] = model["theta"]
            if "interval" in model:
                values["interval"] = model["interval"]
        if "mixing" in file_values:
            mix = file_values.pop("mixing")
            if isinstance(mix, dict):
                mix = [mix]
            if isinstance(mix, list) and mix and isinstance(mix[0], dict):
                values["mixing"] = tuple(m["kind"] for m in mix)
                for m in mix:
                    if m.get("kind") == "explicit":
                        values["explicit_weights"] = m["weights"]
            else:
                values["mixing"] = tuple(mix)
        if "format" in file_values:
            values["fmt"] = file_values.pop("format")
        if "alpha" in file_values:
            a = file_values.pop("alpha")
            values["alpha"] = a if isinstance(a, (list, tuple)) else [a]
        values.update(file_values)
    if values.get("seed") is None and os.environ.get(SEED_ENV_VAR):
        try:
            values["seed"] = int(os.environ[SEED_ENV_VAR])
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer") from exc
    defaults = ExperimentConfig(command=args.command)
    resolved = {k: (v if v is not None else getattr(defaults, k)) for k, v in values.items()}
    for optional in ("means", "thetas", "interval", "max_n", "log_threshold", "explicit_weights"):
        if values.get(optional) is None:
            resolved[optional] = None
    return ExperimentConfig.from_dict(resolved)


_DISPATCH = {
    "analyze": cmd_analyze,
    "simulate-error": cmd_simulate_error,
    "simulate-ess": cmd_simulate_ess,
    "continuous": cmd_continuous,
    "overshoot": cmd_overshoot,
}


def run(argv=None, out=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        handler = _DISPATCH[cfg.command]
        if cfg.command == "analyze" and getattr(args, "performance", False):
            handler = cmd_performance
        buffer = io.StringIO()
        handler(cfg, buffer)
        text = buffer.getvalue()
        if out is not None:
            out.write(text)
        elif args.output:
            with open(args.output, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except ConfigError as exc:
        print(f"seqmix: config error: {exc}", file=sys.stderr)
        return 2
    except SeqmixError as exc:
        print(f"seqmix: numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
