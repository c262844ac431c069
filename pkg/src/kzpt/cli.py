"""Command-line front end.

Each subcommand builds an :class:`ExperimentConfig` (file, then ``--set``
overrides, then explicit flags) and hands it to the harness or to an
analysis oracle. Exit codes: 0 success, 1 bad input, 2 numerical failure.
"""
import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import FORMAT_VERSION, __version__
from .analysis import cross_term_suite, identity_check, rip_constant_bruteforce
from .config import load_config
from .errors import ConfigError, InvalidArgument, SizeGuardError
from .harness import (
    run_error_curve,
    run_period_sweep,
    run_phase_transition,
    run_schedule_ablation,
    run_trial,
    write_manifest,
)
from .sensing import make_operator
from .solvers import DIVERGED

__all__ = ["main", "build_parser"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for numerical failures here
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# flag dest -> dotted config path
_FLAG_PATHS = {
    "matrix": "matrix.kind",
    "m": "matrix.m",
    "N": "matrix.N",
    "noise": "noise.model",
    "sigma": "noise.sigma",
    "solver": "solver.name",
    "gamma": "solver.gamma",
    "lam": "solver.lam",
    "period": "solver.period",
    "epochs": "solver.epochs",
    "rule": "solver.rule",
    "preset": "solver.preset",
    "K": "solver.K",
    "target_error": "solver.target_error",
    "divergence_threshold": "solver.divergence_threshold",
    "trials": "trials",
    "seed": "base_seed",
    "success_threshold": "success_threshold",
    "outputs": "outputs",
    "workers": "workers",
    "tolerance": "tolerance",
    "C_rip": "C_rip",
}


def _add_config_flags(p, extra=()):
    p.add_argument("--config", help="JSON or TOML experiment file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry, e.g. solver.gamma=4 (repeatable)")
    p.add_argument("--matrix", choices=["hadamard", "bernoulli", "gaussian"])
    p.add_argument("--m", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--s", help="sparsity, or a comma list")
    p.add_argument("--noise", choices=["none", "gaussian"])
    p.add_argument("--sigma", type=float)
    p.add_argument("--solver", choices=["kz", "iht", "kziht", "kzpt"])
    p.add_argument("--gamma", help="step size or 'auto'")
    p.add_argument("--lam", type=float)
    p.add_argument("--period", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--rule", choices=["reshuffle", "reshuffle-once", "cyclic", "replacement"])
    p.add_argument("--preset", choices=["subgaussian"])
    p.add_argument("--K", type=float)
    p.add_argument("--target-error", type=float, dest="target_error")
    p.add_argument("--divergence-threshold", type=float, dest="divergence_threshold")
    p.add_argument("--fast", action="store_true", default=None,
                   help="Hadamard fast path for kziht/kzpt")
    p.add_argument("--seed", type=int)
    p.add_argument("--outputs", "--output-dir", dest="outputs")
    p.add_argument("--workers", type=int)
    if "trials" in extra:
        p.add_argument("--trials", type=int)
    if "long_form" in extra:
        p.add_argument("--long-form", action="store_true", default=None, dest="long_form")
    if "phase" in extra:
        p.add_argument("--m-values", dest="m_values", help="comma list")
        p.add_argument("--success-threshold", type=float, dest="success_threshold")
    if "sweep" in extra:
        p.add_argument("--p-list", dest="p_list", help="comma list")
        p.add_argument("--tolerance", type=float)
        p.add_argument("--C-rip", type=float, dest="C_rip")
    if "ablate" in extra:
        p.add_argument("--rules", help="comma list")
        p.add_argument("--gammas", help="comma list, 'auto' means N/m")


def build_parser():
    parser = _Parser(prog="kzpt", description="Kaczmarz / hard-thresholding sparse recovery")
    parser.add_argument("--version", action="version",
                        version=f"kzpt {__version__} (format {FORMAT_VERSION})")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("solve", help="one seeded run; prints the trace as CSV")
    _add_config_flags(p)
    p = sub.add_parser("curve", help="mean error curves over trials")
    _add_config_flags(p, ("trials", "long_form"))
    p = sub.add_parser("phase", help="success-probability grid over (m, s)")
    _add_config_flags(p, ("trials", "phase"))
    p = sub.add_parser("ablate", help="row rules x step sizes for kziht")
    _add_config_flags(p, ("trials", "ablate", "long_form"))
    p = sub.add_parser("sweep-period", help="kzpt over a list of periods")
    _add_config_flags(p, ("trials", "sweep", "long_form"))

    p = sub.add_parser("verify-identity", help="multi-step error identity on random instances")
    p.add_argument("--m", type=int, default=64, help="largest m drawn")
    p.add_argument("--N", type=int, default=64, help="largest N drawn")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-9)

    p = sub.add_parser("rip", help="brute-force restricted isometry constant of A/sqrt(m)")
    p.add_argument("--matrix", choices=["hadamard", "bernoulli", "gaussian"], default="bernoulli")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("cross-term", help="cross-term norms against their bound")
    p.add_argument("--matrix", choices=["hadamard", "bernoulli", "gaussian"], default="bernoulli")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--gamma", default="auto")
    p.add_argument("--K", type=float, default=1.0)
    p.add_argument("--schedules", type=int, default=50)
    p.add_argument("--rule", choices=["reshuffle", "reshuffle-once", "cyclic", "replacement"],
                   default="reshuffle")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _overrides(args):
    out = list(args.set)
    for dest, path in _FLAG_PATHS.items():
        val = getattr(args, dest, None)
        if val is None:
            continue
        out.append(f"{path}={val}" if isinstance(val, str) else f"{path}={json.dumps(val)}")
    for dest, path in (("fast", "solver.fast"), ("long_form", "long_form")):
        if getattr(args, dest, None):
            out.append(f"{path}=true")
    return out


def _config(args):
    overrides = _overrides(args)
    # list-valued flags must stay lists even with a single entry
    for dest, path in (("s", "signal.s"), ("m_values", "m_values"), ("p_list", "p_list"),
                       ("rules", "rules"), ("gammas", "gammas")):
        val = getattr(args, dest, None)
        if val is not None:
            overrides.append(f"{path}={json.dumps(_list(val))}")
    return load_config(args.config, overrides)


def _list(text):
    out = []
    for part in str(text).split(","):
        part = part.strip()
        try:
            out.append(json.loads(part))
        except ValueError:
            out.append(part)
    return out


def _print_seed(seed):
    print(f"seed: {seed}")


def _cmd_solve(args):
    cfg = _config(args)
    _print_seed(cfg.base_seed)
    rec = run_trial(cfg, 0, cfg.signal.s[0])
    print(f"gamma: {rec.gamma!r} lam: {rec.lam!r} period: {rec.period}")
    print(f"final relative error: {rec.final_error!r} ({rec.status}, {rec.trace.epochs} epochs)")
    lines = ["epoch,rel_err,elapsed_seconds,iterate_norm"]
    tr = rec.trace
    for k in range(tr.epochs):
        lines.append(f"{k + 1},{float(tr.relative_error[k])!r},"
                     f"{float(tr.elapsed_seconds[k])!r},{float(tr.iterate_norm[k])!r}")
    text = "\n".join(lines) + "\n"
    if cfg.outputs:
        out = Path(cfg.outputs)
        out.mkdir(parents=True, exist_ok=True)
        (out / "trace.csv").write_text(text)
        write_manifest(out / "manifest.json", cfg, "solve")
    sys.stdout.write(text)
    return 2 if rec.status == DIVERGED else 0


def _fmt_epochs(e):
    return "inf" if e is None else str(e)


def _cmd_curve(args):
    cfg = _config(args)
    _print_seed(cfg.base_seed)
    curves = run_error_curve(cfg)
    for s, c in curves.items():
        print(f"s={s}: final mean rel err {float(c.mean[-1])!r}, "
              f"epochs to {cfg.tolerance:g}: {_fmt_epochs(c.epochs_to(cfg.tolerance))}, "
              f"diverged {int(c.n_diverged[-1])}/{c.n_trials}")
    return 0


def _cmd_phase(args):
    cfg = _config(args)
    _print_seed(cfg.base_seed)
    grid = run_phase_transition(cfg)
    print("m\\s " + " ".join(f"{s:>6}" for s in grid.s_values))
    for i, m in enumerate(grid.m_values):
        print(f"{m:<4}" + " ".join(f"{p:6.2f}" for p in grid.success_prob[i]))
    return 0


def _cmd_ablate(args):
    cfg = _config(args)
    _print_seed(cfg.base_seed)
    for (rule, g), curves in run_schedule_ablation(cfg).items():
        for s, c in curves.items():
            print(f"rule={rule} gamma={g} s={s}: epochs to {cfg.tolerance:g}: "
                  f"{_fmt_epochs(c.epochs_to(cfg.tolerance))}, "
                  f"diverged {int(c.n_diverged[-1])}/{c.n_trials}")
    return 0


def _cmd_sweep(args):
    cfg = _config(args)
    _print_seed(cfg.base_seed)
    for p, res in run_period_sweep(cfg).items():
        for s in res.curves:
            print(f"p={p} gamma={res.gamma!r} s={s}: epochs to {cfg.tolerance:g}: "
                  f"{_fmt_epochs(res.epochs_to_tol[s])} "
                  f"(trial mean {res.mean_epochs_to_tol[s]:g}), "
                  f"rate bound {res.rates[s]['kzpt_rate']:.4g}")
    return 0


def _cmd_identity(args):
    _print_seed(args.seed)
    rep = identity_check(trials=args.trials, m_max=args.m, N_max=args.N, seed=args.seed)
    d = rep.to_dict()
    d["tolerance"] = args.tol
    d["passed"] = rep.max_relative_deviation <= args.tol
    print(json.dumps(d, indent=2))
    print(f"max relative deviation {rep.max_relative_deviation:.3e} "
          f"{'<=' if d['passed'] else '>'} {args.tol:g}")
    return 0 if d["passed"] else 2


def _cmd_rip(args):
    _print_seed(args.seed)
    A = make_operator(args.matrix, args.m, args.N, np.random.default_rng(args.seed))
    rep = rip_constant_bruteforce(np.asarray(A.rows) / np.sqrt(args.m), args.s)
    d = rep.to_dict()
    d.update(matrix=args.matrix, seed=args.seed)
    print(json.dumps(d, indent=2))
    return 0


def _cmd_cross_term(args):
    _print_seed(args.seed)
    gamma = args.gamma if args.gamma == "auto" else float(args.gamma)
    reps = cross_term_suite(args.matrix, args.m, args.N, gamma, args.K, args.schedules,
                            args.seed, args.rule)
    norms = [r.operator_norm for r in reps]
    d = {
        "matrix": args.matrix,
        "seed": args.seed,
        "schedules": len(reps),
        "gamma": reps[0].gamma if reps else None,
        "bound": reps[0].bound if reps else None,
        "gamma_max": reps[0].gamma_max if reps else None,
        "gamma_admissible": reps[0].gamma_admissible if reps else None,
        "max_norm": max(norms, default=0.0),
        "within_bound": sum(r.within_bound for r in reps),
        "reports": [r.to_dict() for r in reps],
    }
    print(json.dumps(d, indent=2))
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "curve": _cmd_curve,
    "phase": _cmd_phase,
    "ablate": _cmd_ablate,
    "sweep-period": _cmd_sweep,
    "verify-identity": _cmd_identity,
    "rip": _cmd_rip,
    "cross-term": _cmd_cross_term,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help, --version
        return exc.code or 0
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, InvalidArgument, SizeGuardError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FloatingPointError, np.linalg.LinAlgError, MemoryError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
