"""Channels in Choi form, Kraus decompositions, Stinespring dilations.

A channel ``E: L(H_in) -> L(H_out)`` is stored canonically by its Choi matrix

    C = sum_i |E_i>><<E_i|        on  H_out kron H_in   (output factor first),

with ``tr(C) = d_in`` and ``tr_out(C) = I_in``. Dilation isometries map
``H_in -> H_anc kron H_out`` with the ancilla factor first, so the i-th Kraus
operator is the i-th ``d_out``-row block of the isometry.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .linalg import (
    ATOL,
    RANK_RTOL,
    dag,
    haar_unitary,
    hermitianize,
    partial_trace,
    unvectorize,
    vectorize,
)

__all__ = [
    "Channel",
    "Isometry",
    "Dilation",
    "kraus_to_choi",
    "choi_to_kraus",
    "dilate",
    "random_dilation",
    "contract",
    "compose",
    "random_channel",
    "channel_to_json",
    "channel_from_json",
    "dilation_connecting_unitary",
]


class Channel:
    """A CPTP map held by its Choi matrix on H_out kron H_in."""

    def __init__(self, choi, d_in: int, d_out: int, *, atol: float = ATOL, validate: bool = True):
        choi = np.array(choi, dtype=complex)
        d_in = int(d_in)
        d_out = int(d_out)
        n = d_in * d_out
        if choi.shape != (n, n):
            raise ValueError(f"choi shape {choi.shape} does not match d_out*d_in = {n}")
        choi.setflags(write=False)
        self.choi = choi
        self.d_in = d_in
        self.d_out = d_out
        self._kraus: tuple | None = None
        if validate:
            self._validate(atol)

    def _validate(self, atol: float) -> None:
        herm_defect = float(np.max(np.abs(self.choi - dag(self.choi))))
        if herm_defect > atol:
            raise ValueError(f"choi is not hermitian (defect {herm_defect:.3e})")
        w = np.linalg.eigvalsh(hermitianize(self.choi))
        if w.size and float(w[0]) < -atol:
            raise ValueError(f"choi is not psd (min eigenvalue {float(w[0]):.3e})")
        marg = partial_trace(self.choi, (self.d_out, self.d_in), (0,))
        defect = float(np.max(np.abs(marg - np.eye(self.d_in))))
        if defect > atol:
            raise ValueError(f"channel is not trace preserving (defect {defect:.3e})")

    @classmethod
    def from_kraus(cls, kraus, *, atol: float = ATOL) -> "Channel":
        """Build the Choi matrix of sum_i E_i rho E_i^dag.

        The Kraus list need not be orthogonal; completeness sum E^dag E = I is
        required. The canonical (orthogonal) Kraus set is recomputed lazily.
        """
        kraus = [np.asarray(e, dtype=complex) for e in kraus]
        if not kraus:
            raise ValueError("need at least one Kraus operator")
        d_out, d_in = kraus[0].shape
        if any(e.shape != (d_out, d_in) for e in kraus):
            raise ValueError("inconsistent Kraus shapes")
        comp = sum(dag(e) @ e for e in kraus)
        defect = float(np.max(np.abs(comp - np.eye(d_in))))
        if defect > atol:
            raise ValueError(f"Kraus set is not complete (defect {defect:.3e})")
        n = d_in * d_out
        choi = np.zeros((n, n), dtype=complex)
        for e in kraus:
            v = vectorize(e)
            choi += np.outer(v, v.conj())
        return cls(choi, d_in, d_out, atol=atol)

    @property
    def kraus(self) -> tuple:
        """Canonical Kraus set from the Choi eigendecomposition.

        Pairwise Hilbert-Schmidt orthogonal; eigenvalues below
        ``RANK_RTOL * lambda_max`` are dropped.
        """
        if self._kraus is None:
            w, v = np.linalg.eigh(hermitianize(self.choi))
            wmax = float(w.max(initial=0.0))
            keep = w > RANK_RTOL * max(wmax, 0.0)
            ops = []
            for i in np.flatnonzero(keep)[::-1]:
                ops.append(np.sqrt(w[i]) * unvectorize(v[:, i], self.d_out, self.d_in))
            self._kraus = tuple(ops)
        return self._kraus

    @property
    def rank(self) -> int:
        return len(self.kraus)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """E(rho) = tr_in[C (I kron rho^T)]."""
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (self.d_in, self.d_in):
            raise ValueError("state dimension mismatch")
        c4 = self.choi.reshape(self.d_out, self.d_in, self.d_out, self.d_in)
        return np.einsum("oapc,ac->op", c4, rho)

    def __repr__(self) -> str:
        return f"Channel(d_in={self.d_in}, d_out={self.d_out}, rank={self.rank})"


def kraus_to_choi(kraus, *, atol: float = ATOL) -> Channel:
    return Channel.from_kraus(kraus, atol=atol)


def choi_to_kraus(ch: Channel) -> tuple:
    return ch.kraus


@dataclass(frozen=True, eq=False)
class Isometry:
    """A matrix with orthonormal columns (d_out x d_in, d_out >= d_in)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] < m.shape[1]:
            raise ValueError(f"isometry needs rows >= cols, got shape {m.shape}")
        defect = float(np.max(np.abs(dag(m) @ m - np.eye(m.shape[1]))))
        if defect > ATOL:
            raise ValueError(f"columns are not orthonormal (defect {defect:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def d_in(self) -> int:
        return self.matrix.shape[1]

    @property
    def d_out(self) -> int:
        return self.matrix.shape[0]

    def channel(self) -> Channel:
        return Channel.from_kraus([self.matrix])


@dataclass(frozen=True, eq=False)
class Dilation:
    """Stinespring isometry V: H_in -> H_anc kron H_out, ancilla first.

    Row index (k, b) = k * d_out + b; the Kraus operator E_k is the k-th
    d_out-row block, E_k = (<k|_anc kron I) V.
    """

    matrix: np.ndarray
    anc_dim: int
    d_out: int

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        r = int(self.anc_dim)
        d_out = int(self.d_out)
        object.__setattr__(self, "anc_dim", r)
        object.__setattr__(self, "d_out", d_out)
        if m.ndim != 2 or m.shape[0] != r * d_out:
            raise ValueError(f"matrix shape {m.shape} does not match anc*out = {r * d_out}")
        defect = float(np.max(np.abs(dag(m) @ m - np.eye(m.shape[1]))))
        if defect > ATOL:
            raise ValueError(f"dilation is not an isometry (defect {defect:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def d_in(self) -> int:
        return self.matrix.shape[1]

    def kraus_blocks(self) -> tuple:
        d2 = self.d_out
        return tuple(self.matrix[k * d2 : (k + 1) * d2, :] for k in range(self.anc_dim))

    def choi_full(self) -> np.ndarray:
        """|V>><<V| on H_anc kron H_out kron H_in."""
        v = vectorize(self.matrix)
        return np.outer(v, v.conj())

    def contract(self) -> Channel:
        """Trace out the ancilla, returning the dilated channel."""
        c = partial_trace(self.choi_full(), (self.anc_dim, self.d_out, self.d_in), (0,))
        return Channel(c, self.d_in, self.d_out)


def dilate(ch: Channel, r: int | None = None) -> Dilation:
    """Canonical dilation from the eigen-Kraus set, zero-padded to rank r."""
    kraus = ch.kraus
    r = len(kraus) if r is None else int(r)
    if r < len(kraus):
        raise ValueError(f"requested ancilla dimension {r} below channel rank {len(kraus)}")
    v = np.zeros((r * ch.d_out, ch.d_in), dtype=complex)
    for k, e in enumerate(kraus):
        v[k * ch.d_out : (k + 1) * ch.d_out, :] = e
    return Dilation(v, r, ch.d_out)


def random_dilation(ch: Channel, r: int, rng: np.random.Generator) -> Dilation:
    """Haar-randomized dilation (U kron I_out) V0 with U on the ancilla."""
    base = dilate(ch, r)
    u = haar_unitary(r, rng)
    v = np.kron(u, np.eye(ch.d_out)) @ base.matrix
    return Dilation(v, r, ch.d_out)


def contract(dil: Dilation) -> Channel:
    return dil.contract()


def compose(after: Channel, before: Channel) -> Channel:
    """Channel composition after(before(rho)) via Kraus products."""
    if before.d_out != after.d_in:
        raise ValueError("dimension mismatch in composition")
    ops = [a @ b for a in after.kraus for b in before.kraus]
    return Channel.from_kraus(ops)


def random_channel(d_in: int, d_out: int, rank: int, rng: np.random.Generator) -> Channel:
    """Random channel of Kraus rank <= rank (generically exactly rank)."""
    from .linalg import psd_inv_sqrt, random_gaussian_matrix

    rank = int(rank)
    if rank < 1:
        raise ValueError("rank must be >= 1")
    if rank * d_out < d_in:
        # trace preservation forces rank(choi) * d_out >= d_in
        raise ValueError(
            f"no channel of Kraus rank {rank} exists for {d_in} -> {d_out}; "
            f"need rank >= ceil(d_in / d_out)"
        )
    gs = [random_gaussian_matrix(d_out, d_in, rng) for _ in range(rank)]
    s = sum(dag(g) @ g for g in gs)
    norm = psd_inv_sqrt(s)
    return Channel.from_kraus([g @ norm for g in gs])


def channel_to_json(ch: Channel) -> str:
    """Serialize as {d_in, d_out, choi_re, choi_im}, row-major flat lists.

    Python's shortest round-trip float repr makes the encoding exact at
    double precision.
    """
    payload = {
        "d_in": ch.d_in,
        "d_out": ch.d_out,
        "choi_re": [float(x) for x in ch.choi.real.reshape(-1)],
        "choi_im": [float(x) for x in ch.choi.imag.reshape(-1)],
    }
    return json.dumps(payload)


def channel_from_json(text: str) -> Channel:
    data = json.loads(text)
    d_in = int(data["d_in"])
    d_out = int(data["d_out"])
    n = d_in * d_out
    re = np.array(data["choi_re"], dtype=float).reshape(n, n)
    im = np.array(data["choi_im"], dtype=float).reshape(n, n)
    return Channel(re + 1j * im, d_in, d_out)


def dilation_connecting_unitary(a: Dilation, b: Dilation) -> np.ndarray:
    """Best-fit ancilla unitary W with (W kron I) a ~= b (polar of the block Gram).

    For two dilations of the same channel with equal ancilla dimension the fit
    is exact up to numerics.
    """
    if a.anc_dim != b.anc_dim or a.d_out != b.d_out or a.d_in != b.d_in:
        raise ValueError("dilations are not comparable")
    ea = a.kraus_blocks()
    eb = b.kraus_blocks()
    r = a.anc_dim
    g = np.zeros((r, r), dtype=complex)
    for i in range(r):
        for j in range(r):
            g[i, j] = np.trace(dag(ea[j]) @ eb[i])
    u, _, vh = np.linalg.svd(g)
    return u @ vh
