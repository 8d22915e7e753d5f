"""Low-order Haar moments: Weingarten weights, twirls, permutation operators.

Everything here is restricted to first and second moments (plus the fourth
moment of matrix elements, which is what the closed-form trace formula below
resolves), which is all the rest of the package needs. Closed forms are
paired with Monte Carlo estimators so each can certify the other.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import _accel
from .linalg import (
    RANK_RTOL,
    _resolve,
    haar_unitaries,
    partial_trace,
    permute_factors,
    swap_operator,
)

__all__ = [
    "weingarten",
    "twirl1",
    "twirl2",
    "fourth_moment_trace",
    "MonteCarloEstimate",
    "mc_fourth_moment_trace",
    "permutation_operator",
    "factor_swap_operator",
    "symmetrizer",
    "symmetrizer_membership",
    "symmetric_sector_dimension",
    "group_average_trace_bound",
]


def weingarten(cycle_type: Sequence[int], d: int) -> float:
    """Weingarten weight for a permutation of the given cycle type on U(d).

    Only the first two moments are tabulated; that is all the closed forms
    in this module consume.
    """
    ct = tuple(sorted(int(c) for c in cycle_type))
    n = sum(ct)
    if n == 1:
        return 1.0 / d
    if n == 2:
        if d < 2:
            raise ValueError("second-moment Weingarten weights need d >= 2")
        if ct == (1, 1):
            return 1.0 / (d * d - 1.0)
        if ct == (2,):
            return -1.0 / (d * (d * d - 1.0))
    raise ValueError(f"cycle type {ct} is outside the tabulated range")


def twirl1(m: np.ndarray, layout, target) -> np.ndarray:
    """Average of (U M U^dag) over Haar U acting on one tensor factor.

    The result replaces the target factor by its maximally mixed marginal:
    identity/d tensor the partial trace.
    """
    dims, pos = _resolve(layout, [target])
    m = np.asarray(m, dtype=complex)
    p = pos[0]
    d = dims[p]
    if d == 1:
        return m.copy()
    k = len(dims)
    mt = partial_trace(m, dims, [p])
    r = np.kron(np.eye(d, dtype=complex) / d, mt)
    order = []
    nxt = 1
    for q in range(k):
        if q == p:
            order.append(0)
        else:
            order.append(nxt)
            nxt += 1
    dims_r = (d,) + tuple(dims[q] for q in range(k) if q != p)
    return permute_factors(r, dims_r, order)


def twirl2(m: np.ndarray, layout, targets) -> np.ndarray:
    """Average of (U tensor U) M (U tensor U)^dag over Haar U.

    Both target factors must share one dimension d; the closed form expands
    in the identity and the swap on the target pair,

        twirl2(M) = I (x) X_I + S (x) X_S,
        X_I = (d M_I - M_S) / (d (d^2 - 1)),
        X_S = (d M_S - M_I) / (d (d^2 - 1)),

    with M_I = tr_t(M) and M_S = tr_t((S (x) I) M).
    """
    dims, pos = _resolve(layout, targets)
    m = np.asarray(m, dtype=complex)
    if len(pos) != 2:
        raise ValueError("twirl2 needs exactly two target factors")
    d = dims[pos[0]]
    if dims[pos[1]] != d:
        raise ValueError("twirl2 targets must share one dimension")
    if d == 1:
        return m.copy()
    k = len(dims)
    order = list(pos) + [q for q in range(k) if q not in pos]
    mp = permute_factors(m, dims, order)
    dims_p = tuple(dims[q] for q in order)
    rest = 1
    for q in dims_p[2:]:
        rest *= q
    s = swap_operator(d)
    m_i = partial_trace(mp, dims_p, [0, 1])
    m_s = partial_trace(np.kron(s, np.eye(rest, dtype=complex)) @ mp, dims_p, [0, 1])
    denom = d * (d * d - 1.0)
    x_i = (d * m_i - m_s) / denom
    x_s = (d * m_s - m_i) / denom
    r = np.kron(np.eye(d * d, dtype=complex), x_i) + np.kron(s, x_s)
    back = [order.index(q) for q in range(k)]
    return permute_factors(r, dims_p, back)


def fourth_moment_trace(a1, b1, a2, b2) -> complex:
    """Closed form of E_U tr(U A1 U^dag B1 U A2 U^dag B2) over Haar U(d)."""
    a1 = np.asarray(a1, dtype=complex)
    b1 = np.asarray(b1, dtype=complex)
    a2 = np.asarray(a2, dtype=complex)
    b2 = np.asarray(b2, dtype=complex)
    d = a1.shape[0]
    for x in (a1, b1, a2, b2):
        if x.shape != (d, d):
            raise ValueError("all four operators must be square and equal size")
    ta1, ta2 = np.trace(a1), np.trace(a2)
    tb1, tb2 = np.trace(b1), np.trace(b2)
    ta12 = np.trace(a1 @ a2)
    tb12 = np.trace(b1 @ b2)
    if d == 1:
        return complex(ta1 * ta2 * tb1 * tb2)
    c1 = 1.0 / (d * d - 1.0)
    c2 = 1.0 / (d * (d * d - 1.0))
    val = c1 * (tb1 * tb2 * ta12 + tb12 * ta1 * ta2)
    val -= c2 * (tb12 * ta12 + tb1 * tb2 * ta1 * ta2)
    return complex(val)


class MonteCarloEstimate(NamedTuple):
    mean: complex
    stderr_real: float
    stderr_imag: float
    n_samples: int


def mc_fourth_moment_trace(
    a1,
    b1,
    a2,
    b2,
    *,
    samples: int = 10_000,
    rng: np.random.Generator | None = None,
    unitaries: np.ndarray | None = None,
) -> MonteCarloEstimate:
    """Monte Carlo twin of fourth_moment_trace.

    Pass a precomputed (count, d, d) Haar batch as unitaries to amortize the
    sampling across many operator quadruples; otherwise rng is required.
    """
    a1 = np.ascontiguousarray(a1, dtype=complex)
    b1 = np.ascontiguousarray(b1, dtype=complex)
    a2 = np.ascontiguousarray(a2, dtype=complex)
    b2 = np.ascontiguousarray(b2, dtype=complex)
    d = a1.shape[0]
    if unitaries is None:
        if rng is None:
            raise ValueError("need either a Haar batch or an rng")
        unitaries = haar_unitaries(d, samples, rng)
    us = np.ascontiguousarray(unitaries, dtype=complex)
    if us.ndim != 3 or us.shape[1:] != (d, d):
        raise ValueError("unitary batch shape does not match the operators")
    # the kernel evaluates tr(U x1 U^dag y1 U x2 U^dag y2) with (x, y) in the
    # roles (second, first) of our signature, hence the swapped arguments
    vals = _accel.fourth_moment_values(us, b1, a1, b2, a2)
    n = vals.size
    mean = complex(vals.mean())
    if n > 1:
        sr = float(vals.real.std(ddof=1) / math.sqrt(n))
        si = float(vals.imag.std(ddof=1) / math.sqrt(n))
    else:
        sr = si = float("inf")
    return MonteCarloEstimate(mean, sr, si, n)


def permutation_operator(d: int, perm: Sequence[int]) -> np.ndarray:
    """Permutation action on (C^d)^(x n): out digit perm[k] = in digit k.

    With this convention the map is a homomorphism,
    P(pi) P(sigma) = P(pi o sigma) where (pi o sigma)[k] = pi[sigma[k]].
    """
    perm = list(perm)
    n = len(perm)
    if sorted(perm) != list(range(n)):
        raise ValueError("perm must be a permutation of range(n)")
    if n == 0:
        return np.eye(1, dtype=complex)
    inv = np.argsort(perm)
    t = np.eye(d**n, dtype=complex).reshape((d,) * (2 * n))
    axes = list(inv) + [n + q for q in range(n)]
    return t.transpose(axes).reshape(d**n, d**n)


def factor_swap_operator(d1: int, d2: int) -> np.ndarray:
    """Unitary sending C^d1 (x) C^d2 to C^d2 (x) C^d1, |i j> -> |j i>."""
    t = np.eye(d1 * d2, dtype=complex).reshape(d1, d2, d1, d2)
    return t.transpose(1, 0, 2, 3).reshape(d1 * d2, d1 * d2)


def symmetrizer(d: int, n: int) -> np.ndarray:
    """Orthogonal projector onto the symmetric subspace of (C^d)^(x n)."""
    acc = np.zeros((d**n, d**n), dtype=complex)
    count = 0
    for perm in itertools.permutations(range(n)):
        acc += permutation_operator(d, perm)
        count += 1
    return acc / count


def symmetrizer_membership(psi: np.ndarray, d_a: int, d_b: int, n: int) -> float:
    """Distance of psi from being invariant under permuting its n pair factors.

    psi lives on (C^d_a (x) C^d_b)^(x n); returns the largest Euclidean norm
    of P(pi) psi - psi over all pair permutations pi, computed by transposing
    axis pairs of the interleaved tensor.
    """
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if psi.size != (d_a * d_b) ** n:
        raise ValueError("state length does not match (d_a d_b)^n")
    t = psi.reshape((d_a, d_b) * n)
    defect = 0.0
    for perm in itertools.permutations(range(n)):
        if perm == tuple(range(n)):
            continue
        inv = np.argsort(perm)
        axes = []
        for m in range(n):
            axes.append(2 * int(inv[m]))
            axes.append(2 * int(inv[m]) + 1)
        diff = t.transpose(axes) - t
        defect = max(defect, float(np.linalg.norm(diff)))
    return defect


def symmetric_sector_dimension(dim_pi: int, m: int) -> int:
    """Dimension of the symmetric subspace of m copies of a dim_pi space."""
    return math.comb(dim_pi + m - 1, m)


def group_average_trace_bound(
    x: np.ndarray, average_fn: Callable[[np.ndarray], np.ndarray]
) -> float:
    """tr(pinv(avg(x)) x), the support-weighted mass of x against its average.

    For a twirl that averages over a group containing x's symmetries this is
    bounded by the dimension of the space; callers assert that bound.
    """
    x = np.asarray(x, dtype=complex)
    xbar = average_fn(x)
    pinv = np.linalg.pinv(xbar, rcond=RANK_RTOL, hermitian=True)
    return float(np.trace(pinv @ x).real)
