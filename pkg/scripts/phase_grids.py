"""Success-probability grids for IHT and KZIHT and their cellwise difference.

    python scripts/phase_grids.py scripts/configs/phase_bernoulli.toml
    python scripts/phase_grids.py scripts/configs/phase_hadamard.toml
"""
import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from kzpt.config import load_config
from kzpt.harness import run_phase_transition


def show(title, grid, m_values, s_values):
    print(title)
    print("  m\\s " + "".join(f"{s:>6d}" for s in s_values))
    for m, row in zip(m_values, grid):
        print(f"  {m:<4d}" + "".join(f"{v:6.2f}" for v in row))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--out", default="results/phase")
    ap.add_argument("--set", action="append", default=[])
    args = ap.parse_args()

    cfg = load_config(args.config, args.set)
    print(f"seed: {cfg.base_seed}")
    grids = {}
    for name in ("iht", "kziht"):
        run_cfg = replace(cfg, solver=replace(cfg.solver, name=name),
                          outputs=str(Path(args.out) / cfg.matrix.kind))
        g = run_phase_transition(run_cfg)
        grids[name] = g.success_prob
        show(f"{name} ({cfg.matrix.kind}, N={cfg.matrix.N})", g.success_prob, g.m_values,
             g.s_values)
    diff = grids["kziht"] - grids["iht"]
    show("kziht - iht", diff, g.m_values, g.s_values)
    print(f"min {diff.min():+.2f}  max {diff.max():+.2f}  "
          f"cells where kziht < iht - 0.1: {int(np.sum(diff < -0.1))}")


if __name__ == "__main__":
    main()
