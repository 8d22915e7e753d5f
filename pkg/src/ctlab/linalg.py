"""Shared dense linear algebra and conventions.

Conventions used throughout the package:

* operators are ``complex128`` numpy arrays in C (row-major) order;
* vectorization is row-major, so ``vec(X Y Z) = (X kron Z^T) vec(Y)`` and
  ``<<X|Y>> = tr(X^dag Y)``; for a dyad, ``vec(|psi><phi|) = psi kron conj(phi)``;
* in tensor products the first factor carries the most significant index,
  matching ``numpy.kron``;
* ``ATOL = 1e-9`` is the default absolute tolerance on unit-normalized
  operators and ``RANK_RTOL = 1e-10`` the rank cutoff relative to the largest
  singular value.

Nothing here mutates its inputs; random sampling always takes an explicit
``numpy.random.Generator``.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

from . import _accel

ATOL = 1e-9
RANK_RTOL = 1e-10

__all__ = [
    "ATOL",
    "RANK_RTOL",
    "FactorLayout",
    "dag",
    "hermitianize",
    "kron_all",
    "vectorize",
    "unvectorize",
    "partial_trace",
    "partial_transpose",
    "permute_factors",
    "trace_norm",
    "operator_norm",
    "min_eig",
    "is_psd",
    "numeric_rank",
    "psd_sqrt",
    "psd_inv_sqrt",
    "support_projector",
    "psd_domination_check",
    "haar_unitary",
    "haar_unitaries",
    "random_gaussian_matrix",
    "random_isometry",
    "random_pure_state",
    "random_density",
    "dft_matrix",
    "swap_operator",
]


@dataclass(frozen=True)
class FactorLayout:
    """Ordered labelled tensor factors of a composite space.

    Labels are arbitrary hashable values (the rest of the package uses
    ``(role, index)`` tuples such as ``("A", 0)``). The first factor is the
    most significant index of the composite space.
    """

    factors: tuple

    def __post_init__(self):
        factors = tuple((lab, int(dim)) for lab, dim in self.factors)
        object.__setattr__(self, "factors", factors)
        labels = [lab for lab, _ in factors]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate factor labels in layout")
        if any(dim < 1 for _, dim in factors):
            raise ValueError("factor dimensions must be positive")

    @property
    def labels(self) -> tuple:
        return tuple(lab for lab, _ in self.factors)

    @property
    def dims(self) -> tuple:
        return tuple(dim for _, dim in self.factors)

    @property
    def dim(self) -> int:
        out = 1
        for _, d in self.factors:
            out *= d
        return out

    def __len__(self) -> int:
        return len(self.factors)

    def __contains__(self, label) -> bool:
        return label in self.labels

    def position(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"label {label!r} not in layout") from None

    def positions(self, labels: Iterable) -> list:
        return [self.position(lab) for lab in labels]

    def dim_of(self, label) -> int:
        return self.factors[self.position(label)][1]

    def without(self, labels: Iterable) -> "FactorLayout":
        drop = set(labels)
        missing = drop - set(self.labels)
        if missing:
            raise KeyError(f"labels {missing!r} not in layout")
        return FactorLayout(tuple(f for f in self.factors if f[0] not in drop))

    def restricted(self, labels: Iterable) -> "FactorLayout":
        keep = list(labels)
        return FactorLayout(tuple((lab, self.dim_of(lab)) for lab in keep))


def dag(a: np.ndarray) -> np.ndarray:
    return np.conj(a).T


def hermitianize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dag(a))


def kron_all(ops: Sequence[np.ndarray]) -> np.ndarray:
    """Tensor product of a sequence, first factor most significant."""
    out = np.array([[1.0 + 0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


def vectorize(x: np.ndarray) -> np.ndarray:
    """Row-major |X>>."""
    return np.asarray(x, dtype=complex).reshape(-1)


def unvectorize(v: np.ndarray, rows: int, cols: int | None = None) -> np.ndarray:
    cols = rows if cols is None else cols
    return np.asarray(v, dtype=complex).reshape(rows, cols)


def _resolve(layout, which) -> tuple:
    """Accept a FactorLayout with labels, or a plain dims tuple with positions."""
    if isinstance(layout, FactorLayout):
        dims = layout.dims
        pos = sorted(layout.position(lab) for lab in which)
    else:
        dims = tuple(int(d) for d in layout)
        pos = sorted(int(p) for p in which)
    if len(set(pos)) != len(pos):
        raise ValueError("repeated factors")
    if pos and (pos[0] < 0 or pos[-1] >= len(dims)):
        raise ValueError("factor position out of range")
    return dims, pos


def _check_square(m: np.ndarray, dims: tuple) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    n = 1
    for d in dims:
        n *= d
    if m.shape != (n, n):
        raise ValueError(f"operator shape {m.shape} does not match factors {dims}")
    return m


def partial_trace(m: np.ndarray, layout, traced) -> np.ndarray:
    """Trace out the named factors (labels for FactorLayout, else positions)."""
    dims, pos = _resolve(layout, traced)
    m = _check_square(m, dims)
    if not pos:
        return m.copy()
    k = len(dims)
    t = m.reshape(dims + dims)
    letters = string.ascii_letters
    if 2 * k > len(letters):
        raise ValueError("too many tensor factors")
    row = list(letters[:k])
    col = list(letters[k : 2 * k])
    for p in pos:
        col[p] = row[p]
    keep = [i for i in range(k) if i not in pos]
    sub = "".join(row) + "".join(col) + "->" + "".join(row[i] for i in keep) + "".join(
        col[i] for i in keep
    )
    res = np.einsum(sub, t)
    nk = 1
    for i in keep:
        nk *= dims[i]
    return res.reshape(nk, nk)


def partial_transpose(m: np.ndarray, layout, transposed) -> np.ndarray:
    """Transpose the named factors in place, leaving the rest alone."""
    dims, pos = _resolve(layout, transposed)
    m = _check_square(m, dims)
    k = len(dims)
    t = m.reshape(dims + dims)
    axes = list(range(2 * k))
    for p in pos:
        axes[p], axes[k + p] = axes[k + p], axes[p]
    n = m.shape[0]
    return t.transpose(axes).reshape(n, n)


def permute_factors(m: np.ndarray, layout, new_order) -> np.ndarray:
    """Reorder tensor factors; new_order lists labels (or positions) in the
    desired output order."""
    if isinstance(layout, FactorLayout):
        dims = layout.dims
        perm = [layout.position(lab) for lab in new_order]
    else:
        dims = tuple(int(d) for d in layout)
        perm = [int(p) for p in new_order]
    if sorted(perm) != list(range(len(dims))):
        raise ValueError("new_order must be a permutation of the layout")
    m = _check_square(m, dims)
    k = len(dims)
    t = m.reshape(dims + dims)
    axes = perm + [k + p for p in perm]
    n = m.shape[0]
    return t.transpose(axes).reshape(n, n)


def trace_norm(m: np.ndarray) -> float:
    """Sum of singular values."""
    return float(np.linalg.svd(np.asarray(m, dtype=complex), compute_uv=False).sum())


def operator_norm(m: np.ndarray) -> float:
    s = np.linalg.svd(np.asarray(m, dtype=complex), compute_uv=False)
    return float(s[0]) if s.size else 0.0


def min_eig(m: np.ndarray) -> float:
    w = np.linalg.eigvalsh(hermitianize(np.asarray(m, dtype=complex)))
    return float(w[0]) if w.size else 0.0


def is_psd(m: np.ndarray, tol: float = ATOL) -> bool:
    return min_eig(m) >= -tol


def numeric_rank(m: np.ndarray, rtol: float = RANK_RTOL) -> int:
    s = np.linalg.svd(np.asarray(m, dtype=complex), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def _eigh_clipped(m: np.ndarray) -> tuple:
    w, v = np.linalg.eigh(hermitianize(np.asarray(m, dtype=complex)))
    return np.clip(w, 0.0, None), v


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = _eigh_clipped(m)
    return (v * np.sqrt(w)) @ dag(v)


def psd_inv_sqrt(m: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Pseudo-inverse square root on the numeric support."""
    w, v = _eigh_clipped(m)
    wmax = w.max(initial=0.0)
    inv = np.where(w > rtol * wmax, 1.0 / np.sqrt(np.where(w > 0, w, 1.0)), 0.0)
    return (v * inv) @ dag(v)


def support_projector(m: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    w, v = _eigh_clipped(m)
    wmax = w.max(initial=0.0)
    keep = w > rtol * wmax
    vs = v[:, keep]
    return vs @ dag(vs)


def psd_domination_check(m: np.ndarray, psi: np.ndarray, tol: float = ATOL) -> bool:
    """Decide M >= |psi><psi| for psd M via <psi| M^+ |psi> <= 1 + tol.

    Requires psi to lie in the numeric support of M; raises ValueError when a
    component beyond tolerance sticks out (the domination is then false for
    the stated reason, and the caller should know).
    """
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    m = np.asarray(m, dtype=complex)
    if m.shape != (psi.size, psi.size):
        raise ValueError("shape mismatch between operator and state")
    w, v = np.linalg.eigh(hermitianize(m))
    wmax = w.max(initial=0.0)
    if w.size and w[0] < -tol * max(wmax, 1.0):
        raise ValueError("operator is not positive semidefinite")
    cutoff = RANK_RTOL * max(wmax, 0.0)
    on = w > cutoff
    c = dag(v) @ psi
    out_norm = float(np.linalg.norm(c[~on]))
    scale = max(float(np.linalg.norm(psi)), 1e-300)
    if out_norm > max(tol, 1e-12) * scale:
        raise ValueError(
            f"state has norm {out_norm:.3e} outside the support of the operator"
        )
    if not np.any(on):
        return bool(np.linalg.norm(psi) <= tol)
    val = float(np.sum(np.abs(c[on]) ** 2 / w[on]))
    return val <= 1.0 + tol


def random_gaussian_matrix(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Standard complex Ginibre matrix (entries of unit variance)."""
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2.0)


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with the diagonal phase correction."""
    g = random_gaussian_matrix(d, d, rng)
    q, r = np.linalg.qr(g)
    diag = np.diagonal(r)
    absd = np.abs(diag)
    ph = np.where(absd > 0, diag / np.where(absd > 0, absd, 1.0), 1.0)
    return q * ph[None, :]


def haar_unitaries(d: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Batch of Haar unitaries, shape (count, d, d)."""
    g = random_gaussian_matrix(count * d, d, rng).reshape(count, d, d)
    return _accel.haar_batch(g)


def random_isometry(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random isometry (rows >= cols) with orthonormal columns."""
    if rows < cols:
        raise ValueError("an isometry needs rows >= cols")
    g = random_gaussian_matrix(rows, cols, rng)
    q, r = np.linalg.qr(g)
    diag = np.diagonal(r)
    absd = np.abs(diag)
    ph = np.where(absd > 0, diag / np.where(absd > 0, absd, 1.0), 1.0)
    return q * ph[None, :]


def random_pure_state(d: int, rng: np.random.Generator) -> np.ndarray:
    v = random_gaussian_matrix(d, 1, rng).reshape(-1)
    return v / np.linalg.norm(v)


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = d if rank is None else int(rank)
    g = random_gaussian_matrix(d, rank, rng)
    rho = g @ dag(g)
    return rho / np.trace(rho).real


def dft_matrix(d: int) -> np.ndarray:
    """Unitary Fourier matrix, F[k, j] = omega^(k j) / sqrt(d)."""
    idx = np.arange(d)
    omega = np.exp(2j * np.pi / d)
    return omega ** np.outer(idx, idx) / np.sqrt(d)


def swap_operator(d: int) -> np.ndarray:
    """SWAP on C^d tensor C^d."""
    e = np.eye(d * d, dtype=complex).reshape(d, d, d, d)
    return e.transpose(0, 1, 3, 2).reshape(d * d, d * d)
