import numpy as np
import pytest

from ctlab.linalg import dag, haar_unitaries, random_pure_state, swap_operator
from ctlab.moments import (
    factor_swap_operator,
    fourth_moment_trace,
    group_average_trace_bound,
    mc_fourth_moment_trace,
    permutation_operator,
    symmetric_sector_dimension,
    symmetrizer,
    symmetrizer_membership,
    twirl1,
    twirl2,
    weingarten,
)


def _herm(d, rng):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (g + g.conj().T) / 2


def test_weingarten_values():
    assert weingarten((1,), 3) == pytest.approx(1 / 3)
    assert weingarten((1, 1), 2) == pytest.approx(1 / 3)
    assert weingarten((2,), 2) == pytest.approx(-1 / 6)
    assert weingarten((1, 1), 4) == pytest.approx(1 / 15)
    with pytest.raises(ValueError):
        weingarten((3,), 4)
    with pytest.raises(ValueError):
        weingarten((1, 1), 1)


# ---------------------------------------------------------------------------
# Twirls
# ---------------------------------------------------------------------------


def test_twirl1_structure():
    rng = np.random.default_rng(0)
    m = _herm(6, rng)
    out = twirl1(m, (2, 3), 0)
    # target factor becomes maximally mixed, the rest keeps its marginal
    from ctlab.linalg import partial_trace

    want = np.kron(np.eye(2) / 2, partial_trace(m, (2, 3), (0,)))
    assert np.abs(out - want).max() < 1e-12


def test_twirl1_on_second_factor():
    rng = np.random.default_rng(1)
    m = _herm(6, rng)
    from ctlab.linalg import partial_trace

    out = twirl1(m, (2, 3), 1)
    want = np.kron(partial_trace(m, (2, 3), (1,)), np.eye(3) / 3)
    assert np.abs(out - want).max() < 1e-12


def test_twirl1_idempotent_and_trace_preserving():
    rng = np.random.default_rng(2)
    m = _herm(6, rng)
    once = twirl1(m, (2, 3), 0)
    assert np.abs(twirl1(once, (2, 3), 0) - once).max() < 1e-12
    assert abs(np.trace(once) - np.trace(m)) < 1e-12


def test_twirl1_unitary_invariance():
    rng = np.random.default_rng(3)
    m = _herm(6, rng)
    u = haar_unitaries(2, 1, rng)[0]
    big = np.kron(u, np.eye(3))
    assert np.abs(twirl1(big @ m @ dag(big), (2, 3), 0) - twirl1(m, (2, 3), 0)).max() < 1e-12


def test_twirl1_monte_carlo():
    rng = np.random.default_rng(4)
    m = _herm(6, rng)
    us = haar_unitaries(2, 20000, rng)
    acc = np.zeros((6, 6), dtype=complex)
    for u in us:
        big = np.kron(u, np.eye(3))
        acc += big @ m @ dag(big)
    acc /= len(us)
    assert np.abs(acc - twirl1(m, (2, 3), 0)).max() < 0.05


def test_twirl2_fixes_identity_and_swap():
    d = 2
    s = swap_operator(d)
    assert np.abs(twirl2(np.eye(d * d), (d, d), (0, 1)) - np.eye(d * d)).max() < 1e-12
    assert np.abs(twirl2(s, (d, d), (0, 1)) - s).max() < 1e-12


def test_twirl2_idempotent():
    rng = np.random.default_rng(5)
    m = _herm(8, rng)  # 2 x 2 x 2, twirl the outer pair
    once = twirl2(m, (2, 2, 2), (0, 2))
    assert np.abs(twirl2(once, (2, 2, 2), (0, 2)) - once).max() < 1e-11


def test_twirl2_monte_carlo():
    rng = np.random.default_rng(6)
    d = 2
    m = _herm(d * d, rng)
    us = haar_unitaries(d, 20000, rng)
    acc = np.zeros_like(m)
    for u in us:
        big = np.kron(u, u)
        acc += big @ m @ dag(big)
    acc /= len(us)
    assert np.abs(acc - twirl2(m, (d, d), (0, 1))).max() < 0.05


def test_twirl2_requires_matching_dims():
    rng = np.random.default_rng(7)
    m = _herm(6, rng)
    with pytest.raises(ValueError):
        twirl2(m, (2, 3), (0, 1))


# ---------------------------------------------------------------------------
# Fourth-moment traces
# ---------------------------------------------------------------------------


def test_fourth_moment_identity_case():
    for d in (2, 3, 4):
        eye = np.eye(d)
        val = fourth_moment_trace(eye, eye, eye, eye)
        assert abs(val - d) < 1e-12


def test_fourth_moment_all_z():
    z = np.diag([1.0, -1.0]).astype(complex)
    val = fourth_moment_trace(z, z, z, z)
    assert abs(val - (-2.0 / 3.0)) < 1e-12


def test_fourth_moment_linearity():
    rng = np.random.default_rng(8)
    a, b, c, e = (_herm(3, rng) for _ in range(4))
    lhs = fourth_moment_trace(2.0 * a, b, c, e)
    assert abs(lhs - 2.0 * fourth_moment_trace(a, b, c, e)) < 1e-10


def test_fourth_moment_shape_guard():
    with pytest.raises(ValueError):
        fourth_moment_trace(np.eye(2), np.eye(3), np.eye(2), np.eye(2))


@pytest.mark.parametrize("d", [2, 3])
def test_fourth_moment_monte_carlo(d):
    rng = np.random.default_rng(20 + d)
    us = haar_unitaries(d, 60000, rng)
    for _ in range(3):
        ops = [_herm(d, rng) for _ in range(4)]
        exact = fourth_moment_trace(*ops)
        est = mc_fourth_moment_trace(*ops, unitaries=us)
        assert abs(est.mean.real - exact.real) <= 5 * est.stderr_real
        assert abs(est.mean.imag - exact.imag) <= 5 * est.stderr_imag


def test_mc_fourth_moment_requires_source():
    with pytest.raises(ValueError):
        mc_fourth_moment_trace(np.eye(2), np.eye(2), np.eye(2), np.eye(2))


def test_mc_fourth_moment_batch_shape_guard():
    rng = np.random.default_rng(9)
    us = haar_unitaries(3, 5, rng)
    with pytest.raises(ValueError):
        mc_fourth_moment_trace(np.eye(2), np.eye(2), np.eye(2), np.eye(2), unitaries=us)


def test_mc_fourth_moment_identity_is_exact():
    rng = np.random.default_rng(10)
    eye = np.eye(3)
    est = mc_fourth_moment_trace(eye, eye, eye, eye, samples=50, rng=rng)
    assert abs(est.mean - 3.0) < 1e-10
    assert est.n_samples == 50


# ---------------------------------------------------------------------------
# Permutation machinery
# ---------------------------------------------------------------------------


def test_permutation_operator_action():
    d = 2
    # out digit perm[k] = in digit k
    p = permutation_operator(d, (1, 2, 0))
    basis = np.zeros(d**3)
    i0, i1, i2 = 1, 0, 1
    basis[(i0 * d + i1) * d + i2] = 1.0
    got = p @ basis
    out = np.zeros(d**3)
    # digit 1 <- i0, digit 2 <- i1, digit 0 <- i2
    out[(i2 * d + i0) * d + i1] = 1.0
    assert np.abs(got - out).max() == 0


def test_permutation_operator_homomorphism():
    d = 3
    pi = (2, 0, 1)
    sigma = (1, 2, 0)
    comp = tuple(pi[sigma[k]] for k in range(3))
    lhs = permutation_operator(d, pi) @ permutation_operator(d, sigma)
    assert np.abs(lhs - permutation_operator(d, comp)).max() == 0


def test_permutation_operator_identity():
    assert np.abs(permutation_operator(3, (0, 1)) - np.eye(9)).max() == 0
    with pytest.raises(ValueError):
        permutation_operator(2, (0, 0))


def test_factor_swap_operator_vectors():
    rng = np.random.default_rng(11)
    x = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    y = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    s = factor_swap_operator(2, 3)
    assert np.abs(s @ np.kron(x, y) - np.kron(y, x)).max() < 1e-14


def test_symmetrizer_projector():
    for d, n in ((2, 2), (2, 3), (3, 2)):
        p = symmetrizer(d, n)
        assert np.abs(p @ p - p).max() < 1e-12
        assert np.abs(p - dag(p)).max() < 1e-12
        assert abs(np.trace(p).real - symmetric_sector_dimension(d, n)) < 1e-10


def test_symmetrizer_absorbs_permutations():
    d, n = 2, 3
    p = symmetrizer(d, n)
    for perm in ((1, 0, 2), (2, 1, 0)):
        assert np.abs(permutation_operator(d, perm) @ p - p).max() < 1e-12


def test_symmetrizer_membership():
    rng = np.random.default_rng(12)
    w = random_pure_state(4, rng)
    sym = np.kron(w, w)
    assert symmetrizer_membership(sym, 2, 2, 2) < 1e-12
    w2 = random_pure_state(4, rng)
    asym = np.kron(w, w2)
    assert symmetrizer_membership(asym, 2, 2, 2) > 0.1
    with pytest.raises(ValueError):
        symmetrizer_membership(np.ones(5), 2, 2, 1)


def test_symmetric_sector_dimension_values():
    assert symmetric_sector_dimension(2, 2) == 3
    assert symmetric_sector_dimension(3, 2) == 6
    assert symmetric_sector_dimension(2, 3) == 4
    assert symmetric_sector_dimension(5, 1) == 5


def test_group_average_trace_bound_twirl1():
    rng = np.random.default_rng(13)
    d = 4
    psi = random_pure_state(d, rng)
    x = np.outer(psi, psi.conj())
    val = group_average_trace_bound(x, lambda m: twirl1(m, (d,), 0))
    assert abs(val - d) < 1e-8


def test_group_average_trace_bound_twirl2():
    # a symmetric pure product state twirls to the normalized symmetrizer,
    # so the bound evaluates to exactly dim of the symmetric sector
    rng = np.random.default_rng(14)
    d = 2
    psi = random_pure_state(d, rng)
    pair = np.kron(psi, psi)
    x = np.outer(pair, pair.conj())
    val = group_average_trace_bound(x, lambda m: twirl2(m, (d, d), (0, 1)))
    assert abs(val - symmetric_sector_dimension(d, 2)) < 1e-8
