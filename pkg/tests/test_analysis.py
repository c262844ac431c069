import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kzpt.analysis import (
    admissible_gamma,
    best_period,
    bias_term,
    cross_term_matrix,
    cross_term_report,
    cross_term_suite,
    identity_check,
    multi_step_rhs,
    rip_constant_bruteforce,
    schedule_hash,
    spectral_norm,
    suffix_cross_term_norms,
    theorem_rate_bounds,
)
from kzpt.errors import InvalidArgument, SizeGuardError
from kzpt.schedules import RESHUFFLE, next_epoch_schedule
from kzpt.sensing import dense_operator, gen_bernoulli, gen_gaussian_fixed_norm, gen_subsampled_bos
from kzpt.solvers import kz_epoch

# m=1024, p=512, C s ln^4 N / m = 0.01: 2^(2/2) * (2 * 0.1)^2
RATE_GOLDEN = 0.08


def test_rhs_trivial_cases(rng):
    A = gen_bernoulli(5, 7, 0)
    d = rng.standard_normal(7)
    assert np.allclose(multi_step_rhs(A, np.arange(5), 0.0, d, np.zeros(5)), d, atol=0)
    B = gen_gaussian_fixed_norm(1, 7, 1)
    a = B.row(0)
    want = d - a * (a @ d) / (a @ a)
    assert np.allclose(multi_step_rhs(B, [0], 1.0, d, np.zeros(1)), want, atol=1e-14)


@given(st.integers(0, 2 ** 32 - 1))
def test_rhs_matches_epoch(seed):
    g = np.random.default_rng(seed)
    A = gen_bernoulli(8, 16, g)
    sched = next_epoch_schedule(RESHUFFLE, 8, 0, seed)
    x = g.standard_normal(16)
    e = g.standard_normal(8)
    b = A.apply(x) + e
    x1 = g.standard_normal(16)
    actual = kz_epoch(x1, A, b, sched, 0.7) - x
    rhs = multi_step_rhs(A, sched, 0.7, x1 - x, e)
    assert np.linalg.norm(rhs - actual) <= 1e-10 * np.linalg.norm(actual)


def test_identity_check_report():
    rep = identity_check(trials=30, seed=3)
    assert rep.trials == 30 and rep.max_relative_deviation <= 1e-9
    assert len(rep.deviations) == 30 and "deviations" not in rep.to_dict()


def test_guards():
    A = gen_bernoulli(2, 5000, 0)
    with pytest.raises(SizeGuardError):
        multi_step_rhs(A, [0, 1], 1.0, np.zeros(5000), np.zeros(2))
    with pytest.raises(SizeGuardError):
        rip_constant_bruteforce(np.eye(40), 10)
    with pytest.raises(InvalidArgument):
        rip_constant_bruteforce(np.eye(4), 5)


def expanded_cross_terms(R, order, gamma):
    """Sum of all ordered products of two or more factors ``-gamma/N a a^T``."""
    m, N = R.shape
    mats = [-gamma / N * np.outer(R[r], R[r]) for r in order]
    B = np.zeros((N, N))
    for k in range(2, m + 1):
        for subset in itertools.combinations(range(m), k):
            P = np.eye(N)
            # later steps multiply from the left
            for j in subset:
                P = mats[j] @ P
            B += P
    return B


@pytest.mark.parametrize("m", [2, 3, 5, 8])
def test_cross_terms_against_expansion(m):
    A = gen_bernoulli(m, 16, m)
    order = next_epoch_schedule(RESHUFFLE, m, 0, 1).order
    gamma = 0.37
    B = cross_term_matrix(A, order, gamma)
    want = expanded_cross_terms(A.to_dense(), order, gamma)
    assert np.allclose(B, want, rtol=0, atol=1e-9 * max(1.0, np.abs(want).max()))
    rep = cross_term_report(A, order, gamma)
    assert rep.operator_norm == pytest.approx(np.linalg.norm(want, 2), rel=1e-9, abs=1e-12)


def test_cross_terms_vanish_for_bos():
    A = gen_subsampled_bos(64, 16, 2)
    for k in range(5):
        rep = cross_term_report(A, next_epoch_schedule(RESHUFFLE, 16, k, 3), 3.3)
        assert rep.operator_norm <= 1e-10


def test_cross_term_single_row_and_bound_fields():
    A = gen_bernoulli(1, 16, 0)
    rep = cross_term_report(A, [0], 1.0)
    assert rep.operator_norm == 0
    B = gen_bernoulli(32, 1024, 0)
    rep = cross_term_report(B, np.arange(32), admissible_gamma(32, 1024))
    assert rep.gamma_admissible and rep.gamma == rep.gamma_max
    assert rep.bound == pytest.approx(
        2 * rep.gamma ** 2 * 32 ** 2 * math.log(32) ** 2 / 32, rel=1e-12)
    assert rep.within_bound
    assert rep.schedule_hash == schedule_hash(np.arange(32))
    assert set(rep.to_dict()) >= {"operator_norm", "bound", "gamma_admissible", "m", "N"}


def test_cross_term_requires_row_norm_sqrt_n():
    with pytest.raises(InvalidArgument):
        cross_term_report(dense_operator(np.ones((3, 4)) * 0.5), [0, 1, 2], 1.0)


def test_cross_term_suite_shares_operator():
    reps = cross_term_suite("bernoulli", 8, 64, schedules=4, seed=5)
    assert len(reps) == 4 and len({r.schedule_hash for r in reps}) > 1
    assert all(r.gamma == reps[0].gamma for r in reps)
    again = cross_term_suite("bernoulli", 8, 64, schedules=4, seed=5)
    assert [r.operator_norm for r in again] == [r.operator_norm for r in reps]


def test_suffix_norms():
    A = gen_bernoulli(6, 16, 1)
    order = next_epoch_schedule(RESHUFFLE, 6, 0, 2).order
    out = suffix_cross_term_norms(A, order, 0.5)
    assert out.shape == (7,) and out[0] == 0 and out[1] == 0
    assert out[-1] == pytest.approx(np.linalg.norm(cross_term_matrix(A, order, 0.5), 2), rel=1e-12)
    tail = order[3:]
    want = np.linalg.norm(expanded_cross_terms(A.to_dense()[tail], np.arange(3), 0.5), 2)
    assert out[3] == pytest.approx(want, rel=1e-9)


def test_spectral_norm_power_iteration(rng):
    M = rng.standard_normal((300, 400))
    assert spectral_norm(M) == pytest.approx(np.linalg.norm(M, 2), rel=1e-9)
    assert spectral_norm(np.zeros((0, 3))) == 0.0


def test_rip_hand_cases():
    for s in (1, 2, 3):
        assert rip_constant_bruteforce(np.eye(5), s).delta == pytest.approx(0.0, abs=1e-15)
    assert rip_constant_bruteforce(np.array([[1.0, 1.0]]), 1).delta == pytest.approx(0.0)
    rep = rip_constant_bruteforce(np.array([[1.0, 1.0]]), 2)
    assert rep.delta == pytest.approx(1.0) and rep.argmax_support == [0, 1]
    A = gen_subsampled_bos(32, 32, 0)
    assert rip_constant_bruteforce(A.to_dense() / math.sqrt(32), 3).delta <= 1e-10


def test_rip_matches_norm_extremes_and_is_monotone(rng):
    A = gen_bernoulli(6, 9, 4).to_dense() / math.sqrt(6)
    deltas = [rip_constant_bruteforce(A, s).delta for s in range(1, 6)]
    assert all(a <= b + 1e-15 for a, b in zip(deltas, deltas[1:]))
    # the sparse vectors' norm ratios never escape [1 - delta, 1 + delta]
    for _ in range(200):
        supp = rng.choice(9, 3, replace=False)
        z = np.zeros(9)
        z[supp] = rng.standard_normal(3)
        r = np.linalg.norm(A @ z) ** 2 / np.linalg.norm(z) ** 2
        assert 1 - deltas[2] - 1e-12 <= r <= 1 + deltas[2] + 1e-12


def test_bias_term_examples():
    A = gen_bernoulli(4, 6, 0)
    assert bias_term(A, np.zeros(4), 2) == 0
    M = np.diag([3.0, -4.0, 1.0])
    # A^T e / m = [3, -4, 1] with m = 3
    assert bias_term(M, np.array([3.0, 3.0, 3.0]), 1) == pytest.approx(5.0)


@given(st.integers(0, 2 ** 32 - 1))
def test_bias_term_enumeration(seed):
    g = np.random.default_rng(seed)
    A = gen_gaussian_fixed_norm(7, 12, g)
    e = g.standard_normal(7)
    v = A.apply_adjoint(e) / 7
    best = max(np.linalg.norm(v[list(S)]) for k in range(5)
               for S in itertools.combinations(range(12), k))
    assert bias_term(A, e, 2) == pytest.approx(best, rel=1e-12)


def test_rate_bounds():
    N = 4096
    s = 0.01 * 1024 / math.log(N) ** 4
    r = theorem_rate_bounds(1024, N, s, 1.0, 512)
    assert r["kziht_rate"] == pytest.approx(0.2, rel=1e-12)
    assert r["kzpt_rate"] == pytest.approx(RATE_GOLDEN, rel=1e-12)
    full = theorem_rate_bounds(1024, N, 5, 1.0, 1024)
    assert full["kzpt_rate"] == full["kziht_rate"]
    with pytest.raises(InvalidArgument):
        theorem_rate_bounds(0, N, 5)


def test_best_period_sweep():
    m, N = 1024, 4096
    s = 0.001 * m / math.log(N) ** 4  # kziht rate 0.063
    p, rates = best_period(m, N, s)
    assert p < m and rates[p] == min(rates.values())
    assert all(m % q == 0 for q in rates)
    # a rate above 1 makes shorter periods only worse
    p_bad, _ = best_period(m, N, 2.0 * m / math.log(N) ** 4)
    assert p_bad == m
