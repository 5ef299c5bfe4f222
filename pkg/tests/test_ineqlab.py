import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pmajorant.errors import InfeasibleExponent
from pmajorant.ineqlab import (
    MASK64,
    CordesViolated,
    NotPositiveDefinite,
    XorShiftRNG,
    check_anisotropic_ineq,
    check_lipschitz_ineq,
    check_monotonicity_ineq,
    cordes_delta,
    kappa_max,
    mu_matrix,
    mu_matrix_sampled,
    random_cordes_matrix,
    relative_slack,
    run_suite,
    search_monotonicity_violation,
    splitmix64,
)


def xorshift_scalar(state):
    state ^= state >> 12
    state ^= (state << 25) & MASK64
    state ^= state >> 27
    return state, (state * 2685821657736338717) & MASK64


# --- PRNG -------------------------------------------------------------------

def test_splitmix_known_answer():
    # first outputs of the reference splitmix64 stream seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4


def test_lanes_follow_scalar_reference():
    rng = XorShiftRNG(42, lanes=4)
    states = [splitmix64(42 + k) for k in range(4)]
    expected = []
    for _ in range(3):
        for k in range(4):
            states[k], out = xorshift_scalar(states[k])
            expected.append(out)
    assert [int(x) for x in rng.next_u64(12)] == expected


def test_rng_determinism_and_range():
    a = XorShiftRNG(7).uniform((1000, 3), -10, 10)
    b = XorShiftRNG(7).uniform((1000, 3), -10, 10)
    assert np.array_equal(a, b)
    assert a.min() >= -10 and a.max() < 10
    assert not np.array_equal(a, XorShiftRNG(8).uniform((1000, 3), -10, 10))
    z = XorShiftRNG(1).normal(200_000)
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1) < 0.01


# --- scalar inequalities -----------------------------------------------------------

def test_relative_slack():
    assert relative_slack(0.0, 0.0) == 0.0
    assert relative_slack(2.0, 1.0) == pytest.approx(0.5)
    assert relative_slack(1.0, 2.0) == pytest.approx(-0.5)


def test_monotonicity_examples():
    a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert check_monotonicity_ineq(4, a, a) == {"monotone_p_ge_2": 0.0}
    # LHS 2, RHS 2^{-2}·(√2)^4 = 1
    assert check_monotonicity_ineq(4, a, b)["monotone_p_ge_2"] == pytest.approx(0.5)
    # LHS 2, RHS 0.5·2/√2
    rhs = 0.5 * 2 / math.sqrt(2)
    assert check_monotonicity_ineq(1.5, a, b)["monotone_p_le_2"] == pytest.approx((2 - rhs) / 2)
    zero = np.zeros(2)
    assert check_monotonicity_ineq(1.5, zero, zero)["monotone_p_le_2"] == 0.0


def test_lipschitz_examples():
    a = np.array([1.0, 0.0])
    assert set(check_lipschitz_ineq(2, a, a).values()) == {0.0}
    b = np.array([2.0, 0.0])
    # LHS |4 − 1| = 3, RHS 2·3·1 = 6
    assert check_lipschitz_ineq(3, a, b)["lipschitz_p_ge_2"] == pytest.approx(0.5)
    for v in check_lipschitz_ineq(2, a, np.array([0.3, -2.0])).values():
        assert abs(v) <= 1e-15


@given(st.sampled_from([1.1, 1.5, 2.0, 3.0, 4.0, 10.0]), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_scalar_inequalities_hold(p, N, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(-10, 10, (2, 64, N))
    for res in (check_monotonicity_ineq(p, a, b), check_lipschitz_ineq(p, a, b)):
        for slack in res.values():
            assert np.min(slack) >= -1e-12


# --- matrices and the Cordes condition ----------------------------------------------

def test_mu_examples():
    assert mu_matrix(np.eye(3)) == pytest.approx(1.0)
    assert mu_matrix(np.diag([1.0, 4.0])) == pytest.approx(1.25)
    assert mu_matrix(7.5 * np.diag([1.0, 4.0])) == pytest.approx(1.25)
    assert mu_matrix_sampled(np.diag([1.0, 4.0]), XorShiftRNG(0)) == pytest.approx(1.25, abs=1e-6)
    with pytest.raises(NotPositiveDefinite):
        mu_matrix(np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        mu_matrix(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_mu_closed_form_against_sampling():
    rng = XorShiftRNG(3)
    for k in range(100):
        N = 2 + k % 3
        Q, _ = np.linalg.qr(rng.normal((N, N)))
        A = (Q * rng.uniform(N, 1.0, 50.0)) @ Q.T
        A = 0.5 * (A + A.T)
        assert mu_matrix_sampled(A, rng, samples=20_000) == pytest.approx(mu_matrix(A), rel=1e-6)


def test_cordes_examples():
    assert cordes_delta(2, np.eye(2)) == 2
    assert cordes_delta(4, np.diag([1.0, 4.0])) == pytest.approx(1.5)
    assert cordes_delta(12, np.diag([1.0, 4.0])) == pytest.approx(-0.5)
    with pytest.raises(CordesViolated):
        check_anisotropic_ineq(12, np.diag([1.0, 4.0]), np.ones(2), np.zeros(2))


def test_kappa_max():
    assert kappa_max(2) == 100.0
    with pytest.raises(InfeasibleExponent):
        kappa_max(1.0)
    for p in (1.1, 1.5, 3.0, 4.0, 10.0):
        k = kappa_max(p)
        assert (1 + k) / (2 * math.sqrt(k)) <= 0.9 * p / abs(p - 2) + 1e-12


@pytest.mark.parametrize("p", [1.1, 1.5, 2.0, 3.0, 10.0])
def test_random_cordes_matrix(p):
    rng = XorShiftRNG(int(10 * p))
    for _ in range(2000):
        A = random_cordes_matrix(p, 3, rng)
        assert np.array_equal(A, A.T)
        assert cordes_delta(p, A) > 0
    first = random_cordes_matrix(p, 2, XorShiftRNG(5))
    assert np.array_equal(first, random_cordes_matrix(p, 2, XorShiftRNG(5)))


def test_anisotropic_examples():
    a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    res = check_anisotropic_ineq(3, np.diag([1.0, 2.0]), a, b)
    assert set(res) == {"aniso_monotone_p_ge_2", "aniso_lipschitz_p_ge_2"}
    assert all(v > 0 for v in res.values())
    assert set(check_anisotropic_ineq(3, np.eye(2), a, a).values()) == {0.0}


def test_anisotropic_identity_matches_scalar_at_p2():
    rng = np.random.default_rng(0)
    a, b = rng.uniform(-10, 10, (2, 50, 3))
    aniso = check_anisotropic_ineq(2, np.eye(3), a, b)
    scalar = check_lipschitz_ineq(2, a, b)
    np.testing.assert_allclose(aniso["aniso_lipschitz_p_ge_2"], scalar["lipschitz_p_ge_2"], atol=1e-13)


def test_published_constant_fails_for_large_p():
    # b = −a makes the scalar inequality sharp: the ratio is exactly 2^{2−p}
    a, b = np.array([-1.0, 0.0]), np.array([1.0, 0.0])
    slack = check_anisotropic_ineq(10, np.eye(2), a, b)["aniso_monotone_p_ge_2"]
    assert slack < -0.5
    assert check_anisotropic_ineq(10, np.eye(2), a, b, repaired=True)["aniso_monotone_p_ge_2"] >= 0
    assert check_anisotropic_ineq(6, np.eye(2), a, b)["aniso_monotone_p_ge_2"] >= 0


@pytest.mark.parametrize("p", [4.0, 6.0, 10.0])
def test_repaired_constant_holds(p):
    rng = XorShiftRNG(int(p))
    for N in (1, 2, 3, 8):
        a, b = rng.uniform((5000, N), -10, 10), rng.uniform((5000, N), -10, 10)
        A = random_cordes_matrix(p, N, rng)
        assert np.min(check_anisotropic_ineq(p, A, a, b, repaired=True)["aniso_monotone_p_ge_2"]) >= -1e-12


def test_violation_search():
    rng = XorShiftRNG(1)
    assert search_monotonicity_violation(12, np.eye(2), rng, 20_000) is None
    A = random_cordes_matrix(4, 3, rng)
    assert search_monotonicity_violation(4, A, rng, 100_000) is None
    witness = search_monotonicity_violation(12, np.diag([1.0, 100.0]), rng, 100_000)
    if witness is not None:
        a, b = witness
        fa = np.diag([1.0, 100.0]) @ a * np.linalg.norm(a) ** 10
        fb = np.diag([1.0, 100.0]) @ b * np.linalg.norm(b) ** 10
        assert (fb - fa) @ (b - a) < 0


# --- suite ------------------------------------------------------------------------

def test_suite_small_runs():
    rep = run_suite(42, trials=1, ps=(1.5, 3.0), mu_matrices=2)
    for per_p in rep.results.values():
        for summary in per_p.values():
            assert summary["samples"] == 1
    assert rep.to_json()["trials"] == 1
    with pytest.raises(ValueError):
        run_suite(42, trials=0)


def test_suite_deterministic():
    a = run_suite(9, trials=2000, ps=(1.5, 4.0), mu_matrices=4).to_json()
    b = run_suite(9, trials=2000, ps=(1.5, 4.0), mu_matrices=4).to_json()
    assert a == b


def test_suite_holds_up_to_p4():
    rep = run_suite(42, trials=100_000, ps=(1.1, 1.5, 2.0, 3.0, 4.0), mu_matrices=10)
    assert rep.violations == 0
    for name, per_p in rep.results.items():
        for p, summary in per_p.items():
            assert summary["samples"] == 100_000
            assert summary["worst_slack"] >= -1e-12
            if p == 2.0 and not name.startswith("aniso"):
                assert abs(summary["worst_slack"]) <= 1e-13
