"""Isometry and channel estimation from a noisy pure-state preparation oracle.

The oracle hands out approximate copies of the columns of a target isometry,
each damaged by an adversarial-strength perturbation and an unknown global
phase.  Column estimates are snapped to the nearest isometry by SVD; running
the procedure twice, the second time against the target precomposed with a
DFT, pins down the relative column phases.  Channel estimation reuses the
same machinery on a fixed dilation of the target channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channels import Channel, Dilation, Isometry, dilate
from .linalg import dft_matrix, operator_norm
from .metrics import choi_trace_distance, diamond_distance

__all__ = [
    "PureStateOracleConfig",
    "pure_state_oracle",
    "weak_isometry_tomography",
    "align_phases",
    "min_phase_op_error",
    "TomographyReport",
    "isometry_tomography",
    "channel_tomography",
]


@dataclass(frozen=True)
class PureStateOracleConfig:
    """Noise budget of the preparation oracle.

    Each prepared state deviates from the target column by at most eps_max
    in squared overlap; producing one column estimate of a d-dimensional
    state is charged ceil(c_q * d / eps_max) oracle queries.
    """

    eps_max: float
    c_q: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.eps_max <= 1.0:
            raise ValueError(f"eps_max must lie in [0, 1], got {self.eps_max}")
        if self.c_q <= 0:
            raise ValueError(f"c_q must be positive, got {self.c_q}")

    def copies_charged(self, d: int) -> int:
        """Query cost of one column estimate in dimension d (0 when exact)."""
        if self.eps_max == 0.0:
            return 0
        return math.ceil(self.c_q * d / self.eps_max)


def pure_state_oracle(
    v: np.ndarray, cfg: PureStateOracleConfig, rng: np.random.Generator
) -> np.ndarray:
    """A noisy copy of the unit vector v, with a uniformly random phase.

    The output is phase * (sqrt(1 - e) v + ...) with e drawn uniformly from
    [0, eps_max] and the orthogonal part Haar random in the complement of v.
    """
    v = np.asarray(v, dtype=complex).reshape(-1)
    d = v.shape[0]
    phase = np.exp(2j * np.pi * rng.uniform())
    if cfg.eps_max == 0.0 or d == 1:
        return phase * v
    e = cfg.eps_max * rng.uniform()
    while True:
        g = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        w = g - v * (v.conj() @ g)
        norm = np.linalg.norm(w)
        if norm > 1e-12:
            break
    w /= norm
    return phase * (math.sqrt(1.0 - e) * v) + math.sqrt(e) * w


def weak_isometry_tomography(
    target: Isometry, cfg: PureStateOracleConfig, rng: np.random.Generator
) -> Isometry:
    """Estimate target column by column, then snap to the nearest isometry.

    Each returned column carries an unknown phase, so the estimate is only
    meaningful up to a diagonal unitary on the right; align_phases removes
    that freedom using a second run.  The query cost is
    target.d_in * cfg.copies_charged(target.d_out).
    """
    cols = [pure_state_oracle(target.matrix[:, k], cfg, rng) for k in range(target.d_in)]
    tilde = np.column_stack(cols)
    u, _, vh = np.linalg.svd(tilde, full_matrices=False)
    return Isometry(u @ vh)


def _lower_median(values: np.ndarray) -> float:
    v = np.sort(np.asarray(values, dtype=float))
    return float(v[(len(v) - 1) // 2])


def align_phases(vhat1: Isometry, vhat2: Isometry, d1: int) -> Isometry:
    """Combine two weak runs (plain target, target @ DFT) into one estimate.

    With column phases phi1, phi2 on the two runs, the matrix
    Phi3 = (vhat1^dag vhat2) / F is rank one with entries
    conj(phi1_k) phi2_j, so the ratios Phi3[k, j] / Phi3[k, 0] recover
    phi2_j / phi2_0 independently of k.  Rows whose reference entry is small
    (magnitude below 0.1) borrow the strongest row; real and imaginary
    parts are combined by lower medians for outlier robustness.  The result
    vhat2 Phi^dag F^dag matches the target up to one global phase.
    """
    d1 = int(d1)
    f = dft_matrix(d1)
    phi3 = (vhat1.matrix.conj().T @ vhat2.matrix) / f
    mags = np.abs(phi3[:, 0])
    best = int(np.argmax(mags))
    rows = []
    for k in range(d1):
        src = k if mags[k] >= 0.1 else best
        ref = phi3[src, 0]
        if abs(ref) < 1e-12:
            rows.append(np.ones(d1, dtype=complex))
        else:
            rows.append(phi3[src, :] / ref)
    ratios = np.array(rows)
    phases = np.ones(d1, dtype=complex)
    for j in range(d1):
        a = _lower_median(ratios[:, j].real)
        b = _lower_median(ratios[:, j].imag)
        mod = math.hypot(a, b)
        if mod >= 1e-12:
            phases[j] = (a + 1j * b) / mod
    aligned = vhat2.matrix @ np.diag(phases.conj()) @ f.conj().T
    return Isometry(aligned)


@dataclass(frozen=True)
class TomographyReport:
    """Outcome of one estimation run.

    op_error is the operator-norm error of the isometry estimate minimized
    over a global phase; choi_error the normalized Choi trace distance of
    the induced channels; diamond_interval the (lower, upper) see-saw
    bracket on their diamond distance.  For channel estimation,
    dilation_estimate keeps the underlying isometry estimate.
    """

    estimate: object
    queries_charged: int
    op_error: float
    choi_error: float
    diamond_interval: tuple
    success: bool
    seed: int | None = None
    dilation_estimate: Isometry | None = None


def min_phase_op_error(a: np.ndarray, b: np.ndarray) -> float:
    """min over theta of the operator norm of a - e^{i theta} b."""

    def val(theta: float) -> float:
        return operator_norm(a - np.exp(1j * theta) * b)

    grid = np.linspace(0.0, 2.0 * np.pi, 360, endpoint=False)
    values = [val(t) for t in grid]
    center = int(np.argmin(values))
    step = grid[1] - grid[0]
    lo, hi = grid[center] - step, grid[center] + step
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = val(x1), val(x2)
    for _ in range(60):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = val(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = val(x2)
    return min(min(values), f1, f2)


def isometry_tomography(
    target: Isometry,
    eps: float,
    rng: np.random.Generator | None = None,
    *,
    seed: int | None = None,
    diamond_restarts: int = 4,
) -> TomographyReport:
    """Full isometry estimation to operator-norm error eps/2.

    Runs the weak column procedure twice (second time against target @ DFT)
    with per-column noise eps_max = eps^2 / 64, aligns the phases, and
    verifies the result.  The success guarantee is derived for eps <= 1/8;
    larger values (up to 1) run the same procedure with extra slack.
    """
    eps = float(eps)
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    if rng is None:
        rng = np.random.default_rng(seed)
    cfg = PureStateOracleConfig(eps_max=eps * eps / 64.0, c_q=1.0)
    d1 = target.d_in
    vhat1 = weak_isometry_tomography(target, cfg, rng)
    rotated = Isometry(target.matrix @ dft_matrix(d1))
    vhat2 = weak_isometry_tomography(rotated, cfg, rng)
    estimate = align_phases(vhat1, vhat2, d1)
    queries = 2 * d1 * cfg.copies_charged(target.d_out)
    op_error = min_phase_op_error(target.matrix, estimate.matrix)
    est_channel = estimate.channel()
    true_channel = target.channel()
    choi_error = choi_trace_distance(est_channel, true_channel)
    interval = diamond_distance(est_channel, true_channel, restarts=diamond_restarts, rng=rng)
    return TomographyReport(
        estimate=estimate,
        queries_charged=queries,
        op_error=op_error,
        choi_error=choi_error,
        diamond_interval=(interval.lower, interval.upper),
        success=2.0 * op_error <= eps,
        seed=seed,
    )


def channel_tomography(
    target: Channel,
    r: int,
    eps: float,
    rng: np.random.Generator | None = None,
    *,
    seed: int | None = None,
    diamond_restarts: int = 4,
) -> TomographyReport:
    """Estimate a channel through a fixed r-slot dilation.

    The query model fixes one dilation isometry of the target (zero padded
    to ancilla dimension r) and runs isometry estimation against it; the
    returned channel is the contraction of the estimated dilation.  Success
    means the normalized Choi trace distance is at most eps.
    """
    if r < target.rank:
        raise ValueError(f"ancilla budget r={r} below the target rank {target.rank}")
    if rng is None:
        rng = np.random.default_rng(seed)
    dil = dilate(target, r)
    iso = Isometry(dil.matrix)
    inner = isometry_tomography(iso, eps, rng, diamond_restarts=diamond_restarts)
    est_iso = inner.estimate
    est_channel = Dilation(est_iso.matrix, r, target.d_out).contract()
    choi_error = choi_trace_distance(est_channel, target)
    interval = diamond_distance(est_channel, target, restarts=diamond_restarts, rng=rng)
    return TomographyReport(
        estimate=est_channel,
        queries_charged=inner.queries_charged,
        op_error=inner.op_error,
        choi_error=choi_error,
        diamond_interval=(interval.lower, interval.upper),
        success=choi_error <= eps,
        seed=seed,
        dilation_estimate=est_iso,
    )
