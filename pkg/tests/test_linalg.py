import numpy as np
import pytest

from ctlab.linalg import (
    ATOL,
    FactorLayout,
    dag,
    dft_matrix,
    haar_unitaries,
    haar_unitary,
    hermitianize,
    is_psd,
    kron_all,
    min_eig,
    numeric_rank,
    operator_norm,
    partial_trace,
    partial_transpose,
    permute_factors,
    psd_domination_check,
    psd_inv_sqrt,
    psd_sqrt,
    random_density,
    random_gaussian_matrix,
    random_isometry,
    random_pure_state,
    support_projector,
    swap_operator,
    trace_norm,
    unvectorize,
    vectorize,
)


def _rand_herm(d, rng):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (g + g.conj().T) / 2


# ---------------------------------------------------------------------------
# FactorLayout
# ---------------------------------------------------------------------------


def test_factor_layout_basic():
    lay = FactorLayout((("a", 2), ("b", 3), ("c", 4)))
    assert lay.labels == ("a", "b", "c")
    assert lay.dims == (2, 3, 4)
    assert lay.dim == 24
    assert len(lay) == 3
    assert "b" in lay
    assert "z" not in lay
    assert lay.position("b") == 1
    assert list(lay.positions(("c", "a"))) == [2, 0]
    assert lay.dim_of("c") == 4


def test_factor_layout_without_and_restricted():
    lay = FactorLayout((("a", 2), ("b", 3), ("c", 4)))
    assert lay.without(("b",)).labels == ("a", "c")
    assert lay.without(("a", "c")).dims == (3,)
    sub = lay.restricted(("c", "a"))
    assert sub.labels == ("c", "a")
    assert sub.dims == (4, 2)


def test_factor_layout_rejects_duplicates():
    with pytest.raises(ValueError):
        FactorLayout((("a", 2), ("a", 3)))


def test_factor_layout_unknown_label():
    lay = FactorLayout((("a", 2),))
    with pytest.raises(KeyError):
        lay.position("b")


# ---------------------------------------------------------------------------
# Elementary helpers
# ---------------------------------------------------------------------------


def test_dag_and_hermitianize():
    rng = np.random.default_rng(0)
    m = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    assert np.abs(dag(m) - m.conj().T).max() == 0
    h = hermitianize(m)
    assert np.abs(h - h.conj().T).max() < 1e-15
    assert np.abs(h - (m + m.conj().T) / 2).max() < 1e-15


def test_kron_all_matches_chain():
    rng = np.random.default_rng(1)
    mats = [rng.standard_normal((d, d)) for d in (2, 3, 2)]
    want = np.kron(np.kron(mats[0], mats[1]), mats[2])
    assert np.abs(kron_all(mats) - want).max() < 1e-14


def test_vectorize_row_major_round_trip():
    rng = np.random.default_rng(2)
    m = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    v = vectorize(m)
    # row-major: entry (i, j) lands at position i * cols + j
    assert v[1 * 4 + 2] == m[1, 2]
    assert np.abs(unvectorize(v, 3, 4) - m).max() == 0
    # square default for cols
    sq = rng.standard_normal((3, 3))
    assert np.abs(unvectorize(vectorize(sq), 3) - sq).max() == 0


# ---------------------------------------------------------------------------
# Partial trace / transpose / permutation
# ---------------------------------------------------------------------------


def test_partial_trace_on_kron():
    rng = np.random.default_rng(3)
    a = _rand_herm(2, rng)
    b = _rand_herm(3, rng)
    m = np.kron(a, b)
    got = partial_trace(m, (2, 3), (1,))
    assert np.abs(got - np.trace(b) * a).max() < 1e-12
    got = partial_trace(m, (2, 3), (0,))
    assert np.abs(got - np.trace(a) * b).max() < 1e-12


def test_partial_trace_label_dispatch_matches_positions():
    rng = np.random.default_rng(4)
    lay = FactorLayout((("x", 2), ("y", 2), ("z", 3)))
    m = _rand_herm(12, rng)
    by_label = partial_trace(m, lay, ("y",))
    by_pos = partial_trace(m, (2, 2, 3), (1,))
    assert np.abs(by_label - by_pos).max() == 0


def test_partial_trace_multiple_factors_preserves_trace():
    rng = np.random.default_rng(5)
    m = _rand_herm(12, rng)
    red = partial_trace(m, (2, 2, 3), (0, 2))
    assert red.shape == (2, 2)
    assert abs(np.trace(red) - np.trace(m)) < 1e-12


def test_partial_transpose_acts_on_one_factor():
    rng = np.random.default_rng(6)
    a = _rand_herm(2, rng)
    b = _rand_herm(3, rng)
    m = np.kron(a, b)
    got = partial_transpose(m, (2, 3), (1,))
    assert np.abs(got - np.kron(a, b.T)).max() < 1e-12
    # involution
    assert np.abs(partial_transpose(got, (2, 3), (1,)) - m).max() < 1e-12


def test_partial_transpose_detects_entanglement():
    d = 3
    omega = np.eye(d).reshape(-1)
    rho = np.outer(omega, omega) / d
    pt = partial_transpose(rho, (d, d), (1,))
    # the maximally entangled state has PT eigenvalue -1/d
    assert min_eig(pt) < -1.0 / d + 1e-12


def test_permute_factors_swaps_kron_order():
    rng = np.random.default_rng(7)
    a = rng.standard_normal((2, 2))
    b = rng.standard_normal((3, 3))
    m = np.kron(a, b)
    got = permute_factors(m, (2, 3), (1, 0))
    assert np.abs(got - np.kron(b, a)).max() < 1e-14


def test_permute_factors_by_label():
    rng = np.random.default_rng(8)
    lay = FactorLayout((("p", 2), ("q", 3), ("s", 2)))
    a = rng.standard_normal((2, 2))
    b = rng.standard_normal((3, 3))
    c = rng.standard_normal((2, 2))
    m = np.kron(np.kron(a, b), c)
    got = permute_factors(m, lay, ("s", "p", "q"))
    assert np.abs(got - np.kron(np.kron(c, a), b)).max() < 1e-13


def test_permute_factors_round_trip():
    rng = np.random.default_rng(9)
    m = _rand_herm(12, rng)
    fwd = permute_factors(m, (2, 2, 3), (2, 0, 1))
    back = permute_factors(fwd, (3, 2, 2), (1, 2, 0))
    assert np.abs(back - m).max() < 1e-13


# ---------------------------------------------------------------------------
# Norms, spectra, rank
# ---------------------------------------------------------------------------


def test_trace_norm_matches_singular_values():
    rng = np.random.default_rng(10)
    m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    want = np.linalg.svd(m, compute_uv=False).sum()
    assert abs(trace_norm(m) - want) < 1e-10


def test_operator_norm_matches_top_singular_value():
    rng = np.random.default_rng(11)
    m = rng.standard_normal((3, 5))
    assert abs(operator_norm(m) - np.linalg.svd(m, compute_uv=False)[0]) < 1e-12


def test_min_eig_and_is_psd():
    m = np.diag([1.0, 0.5, -0.25])
    assert abs(min_eig(m) + 0.25) < 1e-14
    assert not is_psd(m)
    assert is_psd(np.diag([1.0, 0.0, 2.0]))
    # within tolerance counts as psd
    assert is_psd(np.diag([1.0, -1e-12]))


def test_numeric_rank():
    rng = np.random.default_rng(12)
    u = haar_unitary(5, rng)
    m = u @ np.diag([3.0, 1.0, 1e-2, 0.0, 0.0]) @ dag(u)
    assert numeric_rank(m) == 3


# ---------------------------------------------------------------------------
# PSD functional calculus
# ---------------------------------------------------------------------------


def test_psd_sqrt_squares_back():
    rng = np.random.default_rng(13)
    rho = random_density(4, rng)
    s = psd_sqrt(rho)
    assert np.abs(s @ s - rho).max() < 1e-12
    assert is_psd(s)


def test_psd_inv_sqrt_on_support():
    rng = np.random.default_rng(14)
    rho = random_density(5, rng, rank=3)
    inv = psd_inv_sqrt(rho)
    proj = support_projector(rho)
    assert np.abs(psd_sqrt(rho) @ inv - proj).max() < 1e-10


def test_support_projector_idempotent():
    rng = np.random.default_rng(15)
    rho = random_density(4, rng, rank=2)
    p = support_projector(rho)
    assert np.abs(p @ p - p).max() < 1e-12
    assert numeric_rank(p) == 2
    assert np.abs(p @ rho - rho).max() < 1e-12


def test_psd_domination_check_identity():
    rng = np.random.default_rng(16)
    psi = random_pure_state(4, rng)
    val = psd_domination_check(np.eye(4), psi)
    assert abs(val - 1.0) < 1e-10


def test_psd_domination_check_outside_support():
    proj = np.diag([1.0, 1.0, 0.0])
    psi = np.array([0.0, 0.0, 1.0], dtype=complex)
    with pytest.raises(ValueError):
        psd_domination_check(proj, psi)


def test_psd_domination_check_rejects_non_psd():
    psi = np.array([1.0, 0.0], dtype=complex)
    with pytest.raises(ValueError):
        psd_domination_check(np.diag([1.0, -1.0]), psi)


# ---------------------------------------------------------------------------
# Random ensembles
# ---------------------------------------------------------------------------


def test_random_gaussian_matrix_moments():
    rng = np.random.default_rng(17)
    g = random_gaussian_matrix(200, 200, rng)
    # complex standard normal / sqrt(2): unit variance per entry
    var = np.mean(np.abs(g) ** 2)
    assert abs(var - 1.0) < 0.05
    assert abs(np.mean(g)) < 0.02


def test_haar_unitary_is_unitary():
    rng = np.random.default_rng(18)
    for d in (2, 3, 5):
        u = haar_unitary(d, rng)
        assert np.abs(dag(u) @ u - np.eye(d)).max() < 1e-12


def test_haar_unitaries_batch():
    rng = np.random.default_rng(19)
    us = haar_unitaries(3, 7, rng)
    assert us.shape == (7, 3, 3)
    for u in us:
        assert np.abs(dag(u) @ u - np.eye(3)).max() < 1e-12


def test_haar_first_moment_twirl():
    # E[U e0 e0^dag U^dag] = I/d, checked loosely by sample mean
    rng = np.random.default_rng(20)
    d = 3
    us = haar_unitaries(d, 4000, rng)
    acc = np.einsum("sij,skj->ik", us[:, :, :1], us[:, :, :1].conj()) / us.shape[0]
    assert np.abs(acc - np.eye(d) / d).max() < 0.02


def test_random_isometry():
    rng = np.random.default_rng(21)
    v = random_isometry(6, 3, rng)
    assert np.abs(dag(v) @ v - np.eye(3)).max() < 1e-12
    with pytest.raises(ValueError):
        random_isometry(2, 4, rng)


def test_random_pure_state_and_density():
    rng = np.random.default_rng(22)
    psi = random_pure_state(5, rng)
    assert abs(np.linalg.norm(psi) - 1.0) < 1e-12
    rho = random_density(4, rng)
    assert abs(np.trace(rho) - 1.0) < 1e-12
    assert is_psd(rho)
    low = random_density(5, rng, rank=2)
    assert numeric_rank(low) == 2


# ---------------------------------------------------------------------------
# Structured matrices
# ---------------------------------------------------------------------------


def test_dft_matrix():
    for d in (2, 3, 5):
        f = dft_matrix(d)
        assert np.abs(dag(f) @ f - np.eye(d)).max() < 1e-12
    f = dft_matrix(4)
    # positive-sign convention: F[k, j] = exp(+2 pi i k j / d) / sqrt(d)
    assert abs(f[1, 1] - np.exp(2j * np.pi / 4) / 2.0) < 1e-14


def test_swap_operator():
    rng = np.random.default_rng(23)
    d = 3
    s = swap_operator(d)
    x = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    y = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    assert np.abs(s @ np.kron(x, y) - np.kron(y, x)).max() < 1e-13
    assert np.abs(s @ s - np.eye(d * d)).max() < 1e-13


def test_atol_constant_is_small():
    assert 0 < ATOL <= 1e-8
