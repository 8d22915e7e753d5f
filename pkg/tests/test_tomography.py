import math

import numpy as np
import pytest

from ctlab.channels import Channel, Isometry, random_channel
from ctlab.linalg import dft_matrix, haar_unitary, random_isometry, random_pure_state
from ctlab.tomography import (
    PureStateOracleConfig,
    TomographyReport,
    align_phases,
    channel_tomography,
    isometry_tomography,
    min_phase_op_error,
    pure_state_oracle,
    weak_isometry_tomography,
)


def test_oracle_config_validation():
    cfg = PureStateOracleConfig(eps_max=0.01)
    assert cfg.c_q == 1.0
    with pytest.raises(ValueError):
        PureStateOracleConfig(eps_max=-0.1)
    with pytest.raises(ValueError):
        PureStateOracleConfig(eps_max=1.5)
    with pytest.raises(ValueError):
        PureStateOracleConfig(eps_max=0.1, c_q=0.0)


def test_copies_charged():
    assert PureStateOracleConfig(eps_max=0.0).copies_charged(7) == 0
    assert PureStateOracleConfig(eps_max=0.1).copies_charged(3) == 30
    assert PureStateOracleConfig(eps_max=0.1, c_q=2.0).copies_charged(3) == 60
    # ceiling, not rounding
    assert PureStateOracleConfig(eps_max=0.07).copies_charged(2) == math.ceil(2 / 0.07)


def test_oracle_output_norm_and_overlap():
    rng = np.random.default_rng(0)
    cfg = PureStateOracleConfig(eps_max=0.2)
    v = random_pure_state(4, rng)
    for _ in range(50):
        out = pure_state_oracle(v, cfg, rng)
        assert abs(np.linalg.norm(out) - 1.0) < 1e-10
        assert abs(np.vdot(v, out)) ** 2 >= 1.0 - 0.2 - 1e-10


def test_oracle_noiseless_is_phase_only():
    rng = np.random.default_rng(1)
    cfg = PureStateOracleConfig(eps_max=0.0)
    v = random_pure_state(3, rng)
    out = pure_state_oracle(v, cfg, rng)
    assert abs(abs(np.vdot(v, out)) - 1.0) < 1e-12


def test_oracle_one_dimensional():
    rng = np.random.default_rng(2)
    cfg = PureStateOracleConfig(eps_max=0.3)
    out = pure_state_oracle(np.array([1.0 + 0j]), cfg, rng)
    assert abs(abs(out[0]) - 1.0) < 1e-12


def test_oracle_randomizes_phase():
    rng = np.random.default_rng(3)
    cfg = PureStateOracleConfig(eps_max=0.0)
    v = np.array([1.0, 0.0], dtype=complex)
    phases = [pure_state_oracle(v, cfg, rng)[0] for _ in range(20)]
    assert np.std([np.angle(p) for p in phases]) > 0.1


# ---------------------------------------------------------------------------
# Weak estimation and phase alignment
# ---------------------------------------------------------------------------


def test_weak_tomography_noiseless_columns():
    rng = np.random.default_rng(4)
    target = Isometry(random_isometry(4, 3, rng))
    cfg = PureStateOracleConfig(eps_max=0.0)
    est = weak_isometry_tomography(target, cfg, rng)
    # exact columns up to per-column phases
    overlaps = np.abs(np.diag(target.matrix.conj().T @ est.matrix))
    assert np.abs(overlaps - 1.0).max() < 1e-10


def test_weak_tomography_noisy_columns():
    rng = np.random.default_rng(5)
    target = Isometry(random_isometry(3, 2, rng))
    cfg = PureStateOracleConfig(eps_max=1e-4)
    est = weak_isometry_tomography(target, cfg, rng)
    overlaps = np.abs(np.diag(target.matrix.conj().T @ est.matrix))
    assert overlaps.min() > 0.99


def test_align_phases_recovers_exactly():
    # feed the aligner the exact model it assumes: per-column phase freedom
    rng = np.random.default_rng(6)
    d1 = 3
    v = random_isometry(5, d1, rng)
    f = dft_matrix(d1)
    phi1 = np.exp(2j * np.pi * rng.uniform(size=d1))
    phi2 = np.exp(2j * np.pi * rng.uniform(size=d1))
    vhat1 = Isometry(v @ np.diag(phi1))
    vhat2 = Isometry(v @ f @ np.diag(phi2))
    est = align_phases(vhat1, vhat2, d1)
    assert min_phase_op_error(v, est.matrix) < 1e-10


def test_min_phase_op_error_basics():
    rng = np.random.default_rng(7)
    a = random_isometry(4, 2, rng)
    assert min_phase_op_error(a, np.exp(0.7j) * a) < 1e-9
    alpha = 0.8
    b = np.diag([1.0, np.exp(1j * alpha)])
    got = min_phase_op_error(np.eye(2, dtype=complex), b)
    assert abs(got - 2.0 * np.sin(alpha / 4.0)) < 1e-6


# ---------------------------------------------------------------------------
# Full isometry estimation
# ---------------------------------------------------------------------------


def test_isometry_tomography_eps_guard():
    rng = np.random.default_rng(8)
    target = Isometry(random_isometry(3, 2, rng))
    with pytest.raises(ValueError):
        isometry_tomography(target, 0.0)
    with pytest.raises(ValueError):
        isometry_tomography(target, 1.2)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_isometry_tomography_runs(seed):
    rng = np.random.default_rng(42)
    target = Isometry(random_isometry(3, 2, rng))
    rep = isometry_tomography(target, 0.2, seed=seed)
    assert isinstance(rep, TomographyReport)
    assert rep.success
    assert 2.0 * rep.op_error <= 0.2
    assert rep.seed == seed
    # charged per the ceiling formula: two weak runs of d1 columns each
    assert rep.queries_charged == 2 * 2 * math.ceil(64 * 3 / 0.2**2)
    lo, hi = rep.diamond_interval
    assert rep.choi_error <= lo + 1e-7
    assert lo <= hi + 1e-9
    assert isinstance(rep.estimate, Isometry)
    assert rep.dilation_estimate is None


def test_isometry_tomography_deterministic_via_seed():
    rng = np.random.default_rng(43)
    target = Isometry(random_isometry(2, 2, rng))
    a = isometry_tomography(target, 0.25, seed=11)
    b = isometry_tomography(target, 0.25, seed=11)
    assert a.op_error == b.op_error
    assert a.choi_error == b.choi_error
    assert np.abs(a.estimate.matrix - b.estimate.matrix).max() == 0


def test_isometry_tomography_unitary_target():
    rng = np.random.default_rng(44)
    target = Isometry(haar_unitary(2, rng))
    rep = isometry_tomography(target, 0.3, seed=1)
    assert rep.success


# ---------------------------------------------------------------------------
# Channel estimation through a dilation
# ---------------------------------------------------------------------------


def test_channel_tomography_rank_guard():
    rng = np.random.default_rng(9)
    ch = random_channel(2, 2, 3, rng)
    with pytest.raises(ValueError):
        channel_tomography(ch, 2, 0.2)


def test_channel_tomography_runs():
    rng = np.random.default_rng(45)
    ch = random_channel(2, 2, 2, rng)
    rep = channel_tomography(ch, 2, 0.3, seed=5)
    assert rep.success
    assert rep.choi_error <= 0.3
    # dilation isometry has r * d_out rows
    assert rep.dilation_estimate.d_out == 4
    assert rep.dilation_estimate.d_in == 2
    assert isinstance(rep.estimate, Channel)
    assert rep.queries_charged == 2 * 2 * math.ceil(64 * 4 / 0.3**2)
    from ctlab.metrics import choi_trace_distance

    assert rep.choi_error == pytest.approx(choi_trace_distance(rep.estimate, ch))


def test_channel_tomography_padded_ancilla():
    # a rank-1 channel estimated through a larger dilation window
    rng = np.random.default_rng(46)
    u = haar_unitary(2, rng)
    ch = Channel.from_kraus([u])
    rep = channel_tomography(ch, 3, 0.4, seed=2)
    assert rep.success
    assert rep.queries_charged == 2 * 2 * math.ceil(64 * 6 / 0.4**2)
