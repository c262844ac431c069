"""KZPT over a list of thresholding periods, with an IHT baseline.

    python scripts/period_sweep.py scripts/configs/period_sweep.toml
    python scripts/period_sweep.py scripts/configs/kzpt_period80.toml
"""
import argparse
from dataclasses import replace
from pathlib import Path

from kzpt.analysis import best_period
from kzpt.config import load_config
from kzpt.harness import run_error_curve, run_period_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--out", default="results/periods")
    ap.add_argument("--no-baseline", action="store_true")
    ap.add_argument("--set", action="append", default=[])
    args = ap.parse_args()

    cfg = replace(load_config(args.config, args.set), outputs=args.out)
    print(f"seed: {cfg.base_seed}")
    tol = cfg.tolerance
    for p, res in run_period_sweep(cfg).items():
        for s, c in res.curves.items():
            e = res.epochs_to_tol[s]
            print(f"kzpt p={p:<4d} gamma={res.gamma:<7.3g} s={s:<3d} epochs to {tol:g}: "
                  f"{'inf' if e is None else e:>4} (trial mean {res.mean_epochs_to_tol[s]:.2f})"
                  f"  final {c.mean[-1]:.2e}  rate bound {res.rates[s]['kzpt_rate']:.3g}")
    if not args.no_baseline:
        base = replace(cfg, solver=replace(cfg.solver, name="iht"),
                       outputs=str(Path(args.out) / "iht"))
        for s, c in run_error_curve(base).items():
            e = c.epochs_to(tol)
            print(f"iht            s={s:<3d} epochs to {tol:g}: {'inf' if e is None else e:>4}"
                  f"  diverged {int(c.n_diverged[-1])}/{c.n_trials}")
    for s in cfg.signal.s:
        p, _ = best_period(cfg.matrix.m, cfg.matrix.N, s, cfg.C_rip)
        print(f"formula-optimal divisor period for s={s} (C_rip={cfg.C_rip:g}): {p}")


if __name__ == "__main__":
    main()
