"""Reshuffling vs sampling with replacement for KZIHT.

    python scripts/schedule_ablation.py scripts/configs/row_rules.toml
"""
import argparse
from dataclasses import replace

from kzpt.config import load_config
from kzpt.harness import run_schedule_ablation


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--out", default="results/ablation")
    ap.add_argument("--set", action="append", default=[])
    args = ap.parse_args()

    cfg = replace(load_config(args.config, args.set), outputs=args.out)
    print(f"seed: {cfg.base_seed}")
    for (rule, g), curves in run_schedule_ablation(cfg).items():
        for s, c in curves.items():
            e = c.epochs_to(cfg.tolerance)
            print(f"gamma={str(g):5s} {rule:12s} s={s:<3d} epochs to {cfg.tolerance:g}: "
                  f"{'inf' if e is None else e:>4}  diverged {int(c.n_diverged[-1])}/{c.n_trials}")


if __name__ == "__main__":
    main()
