"""Desk-scale checks of the epoch identity, cross-term bound, RIP and noise floor.

    python scripts/oracles.py
"""
import json
import math

import numpy as np

from kzpt.analysis import (
    admissible_gamma,
    bias_term,
    cross_term_suite,
    identity_check,
    rip_constant_bruteforce,
    suffix_cross_term_norms,
)
from kzpt.schedules import RESHUFFLE, next_epoch_schedule
from kzpt.sensing import make_measurements, make_operator


def main():
    rep = identity_check(trials=100, seed=0)
    print("identity:", json.dumps(rep.to_dict()))

    for kind, m, N in [("hadamard", 64, 256), ("bernoulli", 32, 1024), ("gaussian", 32, 1024)]:
        reps = cross_term_suite(kind, m, N, schedules=50, seed=0)
        norms = np.array([r.operator_norm for r in reps])
        print(f"cross terms {kind} {m}x{N}: gamma={reps[0].gamma:.4g} max {norms.max():.3e} "
              f"bound {reps[0].bound:.3e} inside {sum(r.within_bound for r in reps)}/50")

    A = make_operator("bernoulli", 32, 1024, np.random.default_rng(0))
    g = admissible_gamma(32, 1024)
    suffix = suffix_cross_term_norms(A, next_epoch_schedule(RESHUFFLE, 32, 0, 0), g)
    print(f"suffix cross-term norms (every 8th): {np.round(suffix[::8], 6).tolist()}")

    for kind in ("bernoulli", "gaussian", "hadamard"):
        B = make_operator(kind, 16, 32, np.random.default_rng(1))
        deltas = [rip_constant_bruteforce(np.asarray(B.rows) / math.sqrt(16), s).delta
                  for s in (1, 2, 3)]
        print(f"rip {kind} 16x32 delta_1..3: {np.round(deltas, 4).tolist()}")

    rng = np.random.default_rng(2)
    H = make_operator("hadamard", 256, 1024, rng)
    x = np.zeros(1024)
    x[rng.choice(1024, 5, replace=False)] = rng.standard_normal(5)
    meas = make_measurements(H, x, 0.01, rng)
    print(f"noise floor (sigma=0.01, s=5): {bias_term(H, meas.noise, 5):.4e}")


if __name__ == "__main__":
    main()
