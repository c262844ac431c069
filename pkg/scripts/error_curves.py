"""Mean error curves for several solvers on one config (sensing-matrix comparisons).

    python scripts/error_curves.py scripts/configs/bernoulli_sparsity.toml --solvers iht,kziht
    python scripts/error_curves.py scripts/configs/hadamard_decay.toml --solvers iht,kziht
"""
import argparse
from dataclasses import replace
from pathlib import Path

from kzpt.config import load_config
from kzpt.harness import run_error_curve


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--solvers", default="iht,kziht")
    ap.add_argument("--out", default="results/curves")
    ap.add_argument("--set", action="append", default=[])
    args = ap.parse_args()

    cfg = load_config(args.config, args.set)
    print(f"seed: {cfg.base_seed}")
    for name in args.solvers.split(","):
        out = Path(args.out) / name
        run_cfg = replace(cfg, solver=replace(cfg.solver, name=name), outputs=str(out))
        for s, c in run_error_curve(run_cfg).items():
            e = c.epochs_to(cfg.tolerance)
            print(f"{name:6s} s={s:<4d} final mean {c.mean[-1]:.3e}  epochs to "
                  f"{cfg.tolerance:g}: {'inf' if e is None else e:>4}  "
                  f"diverged {int(c.n_diverged[-1])}/{c.n_trials}")
        print(f"  -> {out}")


if __name__ == "__main__":
    main()
