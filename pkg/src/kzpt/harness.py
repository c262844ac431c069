"""Seeded multi-trial experiments: error curves, phase grids, ablations, period sweeps.

Each trial's randomness comes from ``SeedSequence([base_seed, trial, m, s])``
spawned into four independent streams (matrix, signal, noise, schedule).
Solvers and rules never enter the key, so runs that differ only in the
solver or row rule see the same operators, signals and noise, and results
do not depend on execution order.
"""
import csv
import json
import math
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import FORMAT_VERSION, __version__
from .analysis import bias_term, theorem_rate_bounds
from .config import solver_params
from .core import random_sparse_signal
from .sensing import make_measurements, make_operator
from .solvers import DIVERGED, run_solver

__all__ = [
    "TrialRecord",
    "Curve",
    "PhaseGrid",
    "trial_streams",
    "run_trial",
    "aggregate_curve",
    "run_error_curve",
    "run_phase_transition",
    "run_schedule_ablation",
    "run_period_sweep",
    "write_curve_csv",
    "write_trials_csv",
    "write_phase_csv",
    "write_manifest",
    "git_describe",
]

STREAMS = ("matrix", "signal", "noise", "schedule")
SEED_DERIVATION = "SeedSequence([base_seed, trial, m, s]).spawn(4) -> matrix, signal, noise, schedule"


@dataclass
class TrialRecord:
    trial: int
    m: int
    N: int
    s: int
    solver: str
    rule: str
    gamma: float
    lam: float
    period: int
    seed_key: list
    trace: object = field(repr=False)
    x_star_norm: float = math.nan
    noise_floor: float = 0.0

    @property
    def status(self):
        return self.trace.status

    @property
    def final_error(self):
        return self.trace.final_error

    @property
    def final_abs_error(self):
        return self.trace.final_error * self.x_star_norm

    def success(self, threshold):
        return self.status != DIVERGED and self.final_error < threshold


@dataclass
class Curve:
    s: int
    epoch: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    n_trials: int
    n_diverged: np.ndarray
    records: list = field(repr=False, default_factory=list)

    def epochs_to(self, tol):
        hit = np.flatnonzero(self.mean <= tol)
        return int(self.epoch[hit[0]]) if hit.size else None

    def mean_epochs_to(self, tol):
        """Trial-averaged first epoch reaching ``tol``; ``inf`` if some trial never does."""
        hits = [r.trace.epochs_to(tol) for r in self.records]
        if not hits or any(h is None for h in hits):
            return math.inf
        return float(np.mean(hits))


@dataclass
class PhaseGrid:
    s_values: list
    m_values: list
    success_prob: np.ndarray
    trials: int
    solver: str


def trial_streams(base_seed, trial, m, s):
    key = [int(base_seed), int(trial), int(m), int(s)]
    return key, dict(zip(STREAMS, np.random.SeedSequence(key).spawn(len(STREAMS))))


def run_trial(cfg, trial, s, m=None, solver=None, rule=None, period=None, gamma=None):
    """One seeded run. Keyword overrides replace the corresponding config entries."""
    sv = cfg.solver if solver is None else solver
    rule = sv.rule if rule is None else rule
    m = cfg.matrix.m if m is None else m
    N, kind = cfg.matrix.N, cfg.matrix.kind
    key, ss = trial_streams(cfg.base_seed, trial, m, s)

    A = make_operator(kind, m, N, ss["matrix"])
    x_star = random_sparse_signal(N, s, ss["signal"])
    sigma = cfg.noise.sigma if cfg.noise.model == "gaussian" else 0.0
    meas = make_measurements(A, x_star, sigma, ss["noise"])

    params = solver_params(sv, kind, m, N, s, period)
    if gamma is not None:
        params = replace(params, gamma=float(gamma))
    trace = run_solver(sv.name, A, meas.b, params, rule=rule, seed=ss["schedule"],
                       x_star=x_star, fast=sv.fast)
    return TrialRecord(
        trial=trial, m=m, N=N, s=s, solver=sv.name, rule=rule,
        gamma=params.gamma, lam=params.lam, period=params.period, seed_key=key,
        trace=trace, x_star_norm=float(np.linalg.norm(x_star)),
        noise_floor=bias_term(A, meas.noise, s) if sigma > 0 else 0.0,
    )


def _map(fn, items, workers):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def aggregate_curve(records, divergence_threshold, s=None):
    """Per-epoch mean and std of the relative error across trials.

    Diverged trials contribute ``divergence_threshold`` from their divergence
    epoch on; trials that stopped early for reaching the target keep their
    last value.
    """
    records = sorted(records, key=lambda r: r.trial)
    L = max(r.trace.epochs for r in records)
    vals = np.empty((len(records), L))
    div = np.zeros((len(records), L), dtype=bool)
    for i, r in enumerate(records):
        e = np.asarray(r.trace.relative_error, dtype=np.float64)
        k = len(e)
        if r.status == DIVERGED:
            vals[i, :k - 1] = e[:k - 1]
            vals[i, k - 1:] = divergence_threshold
            div[i, k - 1:] = True
        else:
            vals[i, :k] = e
            vals[i, k:] = e[-1]
    return Curve(
        s=records[0].s if s is None else s,
        epoch=np.arange(1, L + 1),
        mean=vals.mean(axis=0),
        std=vals.std(axis=0),
        n_trials=len(records),
        n_diverged=div.sum(axis=0),
        records=records,
    )


def _outdir(cfg):
    if cfg.outputs is None:
        return None
    out = Path(cfg.outputs)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _curves_for(cfg, solver=None, rule=None, period=None, gamma=None, tag=""):
    curves = {}
    for s in cfg.signal.s:
        recs = _map(lambda t: run_trial(cfg, t, s, solver=solver, rule=rule, period=period,
                                        gamma=gamma),
                    range(cfg.trials), cfg.workers)
        curves[s] = aggregate_curve(recs, cfg.solver.divergence_threshold, s)
    out = _outdir(cfg)
    if out is not None:
        for s, c in curves.items():
            write_curve_csv(out / f"curve{tag}_s{s}.csv", c)
            if cfg.long_form:
                write_trials_csv(out / f"trials{tag}_s{s}.csv", c.records)
    return curves


def run_error_curve(cfg):
    """Mean relative-error curve per sparsity level; returns ``{s: Curve}``."""
    curves = _curves_for(cfg)
    _manifest(cfg, "curve", curves=curves)
    return curves


def run_phase_transition(cfg):
    """Empirical success probability over ``m_values x signal.s``."""
    m_values = cfg.m_values or [cfg.matrix.m]
    s_values = list(cfg.signal.s)
    grid = np.zeros((len(m_values), len(s_values)))
    cells = [(i, j) for i in range(len(m_values)) for j in range(len(s_values))]
    for i, j in cells:
        m, s = m_values[i], s_values[j]
        recs = _map(lambda t: run_trial(cfg, t, s, m=m), range(cfg.trials), cfg.workers)
        grid[i, j] = sum(r.success(cfg.success_threshold) for r in recs) / cfg.trials
    result = PhaseGrid(s_values=s_values, m_values=list(m_values), success_prob=grid,
                       trials=cfg.trials, solver=cfg.solver.name)
    out = _outdir(cfg)
    if out is not None:
        write_phase_csv(out / f"phase_{cfg.solver.name}.csv", result)
    _manifest(cfg, "phase", m_values=m_values)
    return result


def run_schedule_ablation(cfg):
    """KZIHT under each row rule and step size, sharing everything but the rule.

    Returns ``{(rule, gamma_label): {s: Curve}}``; ``"auto"`` stands for ``N/m``.
    """
    rules = cfg.rules or ["reshuffle", "replacement"]
    gammas = cfg.gammas or [1.0, "auto"]
    solver = replace(cfg.solver, name="kziht", preset=None)
    results = {}
    for g in gammas:
        gval = cfg.matrix.N / cfg.matrix.m if g == "auto" else float(g)
        for rule in rules:
            tag = f"_{rule}_g{gval:g}"
            results[(rule, g)] = _curves_for(cfg, solver=solver, rule=rule, gamma=gval, tag=tag)
    _manifest(cfg, "ablation", rules=rules, gammas=gammas)
    return results


@dataclass
class PeriodResult:
    period: int
    gamma: float
    curves: dict
    epochs_to_tol: dict
    mean_epochs_to_tol: dict
    rates: dict


def run_period_sweep(cfg):
    """KZPT for each period in ``p_list``; returns ``{p: PeriodResult}`` and writes a summary table."""
    p_list = cfg.p_list or [cfg.matrix.m]
    solver = replace(cfg.solver, name="kzpt")
    m, N = cfg.matrix.m, cfg.matrix.N
    results = {}
    for p in p_list:
        curves = _curves_for(cfg, solver=solver, period=p, tag=f"_p{p}")
        any_rec = next(iter(curves.values())).records[0]
        results[p] = PeriodResult(
            period=p,
            gamma=any_rec.gamma,
            curves=curves,
            epochs_to_tol={s: c.epochs_to(cfg.tolerance) for s, c in curves.items()},
            mean_epochs_to_tol={s: c.mean_epochs_to(cfg.tolerance) for s, c in curves.items()},
            rates={s: theorem_rate_bounds(m, N, s, cfg.C_rip, p) for s in curves},
        )
    out = _outdir(cfg)
    if out is not None:
        with open(out / "period_sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["p", "s", "gamma", "epochs_to_tol", "mean_epochs_to_tol",
                        "kziht_rate", "kzpt_rate"])
            for p, res in results.items():
                for s in res.curves:
                    e = res.epochs_to_tol[s]
                    w.writerow([p, s, repr(res.gamma), "inf" if e is None else e,
                                repr(res.mean_epochs_to_tol[s]),
                                repr(res.rates[s]["kziht_rate"]),
                                repr(res.rates[s]["kzpt_rate"])])
    _manifest(cfg, "period-sweep", p_list=p_list)
    return results


# ---------------------------------------------------------------------------
# persistence


def write_curve_csv(path, curve):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "mean_rel_err", "std_rel_err", "n_trials", "n_diverged"])
        for k in range(len(curve.epoch)):
            w.writerow([int(curve.epoch[k]), repr(float(curve.mean[k])),
                        repr(float(curve.std[k])), curve.n_trials, int(curve.n_diverged[k])])


def write_trials_csv(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "epoch", "rel_err", "elapsed_seconds", "status"])
        for r in records:
            tr = r.trace
            for k in range(tr.epochs):
                w.writerow([r.trial, k + 1, repr(float(tr.relative_error[k])),
                            repr(float(tr.elapsed_seconds[k])), tr.status])


def write_phase_csv(path, grid):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "s", "success_prob", "trials"])
        for i, m in enumerate(grid.m_values):
            for j, s in enumerate(grid.s_values):
                w.writerow([m, s, repr(float(grid.success_prob[i, j])), grid.trials])


def git_describe():
    try:
        res = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return res.stdout.strip() or "unknown"


def write_manifest(path, cfg, experiment, **extra):
    s_values = list(cfg.signal.s)
    m_values = extra.get("m_values") or [cfg.matrix.m]
    doc = {
        "experiment": experiment,
        "version": __version__,
        "format_version": FORMAT_VERSION,
        "git_describe": git_describe(),
        "config": cfg.to_dict(),
        "seeds": {
            "base_seed": cfg.base_seed,
            "derivation": SEED_DERIVATION,
            "trial_keys": [[cfg.base_seed, t, m, s] for m in m_values for s in s_values
                           for t in range(cfg.trials)],
        },
    }
    for k, v in extra.items():
        if k != "curves":
            doc[k] = v
    if "curves" in extra:
        doc["status_counts"] = {
            str(s): {st: sum(r.status == st for r in c.records)
                     for st in sorted({r.status for r in c.records})}
            for s, c in extra["curves"].items()
        }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return doc


def _manifest(cfg, experiment, **extra):
    out = _outdir(cfg)
    if out is not None:
        write_manifest(out / "manifest.json", cfg, experiment, **extra)
