"""Hot-loop kernels with numba twins and pure-numpy fallbacks.

The numba path is used whenever numba imports cleanly; set ``CTL_NO_NUMBA=1``
to force the numpy path. Both paths are exact twins (same results bit for bit
up to BLAS reduction order), and ``benchmarks/bench_kernels.py`` times them
against each other.
"""

from __future__ import annotations

import os

import numpy as np


def _numba_wanted() -> bool:
    flag = os.environ.get("CTL_NO_NUMBA", "").strip().lower()
    return flag not in ("1", "true", "yes", "on")


_HAVE_NUMBA = False
if _numba_wanted():
    try:
        import numba

        _HAVE_NUMBA = True
    except ImportError:
        _HAVE_NUMBA = False

# Mutable so a failed compile can demote us to the numpy path at run time.
_state = {"numba": _HAVE_NUMBA}


def active_path() -> str:
    """Return "numba" or "numpy" depending on the currently active kernels."""
    return "numba" if _state["numba"] else "numpy"


def _haar_batch_np(gaussians: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(gaussians)
    d = np.einsum("...ii->...i", r)
    absd = np.abs(d)
    ph = np.where(absd > 0, d / np.where(absd > 0, absd, 1.0), 1.0)
    return q * ph[..., None, :]


def _fourth_moment_values_np(us, a1, b1, a2, b2):
    ud = us.conj().transpose(0, 2, 1)
    x1 = us @ b1 @ ud
    x2 = us @ b2 @ ud
    y = x1 @ a1 @ x2 @ a2
    return np.einsum("bii->b", y)


def _quad_form_batch_np(vecs, t):
    tv = vecs @ t.T
    return np.sum(vecs.conj() * tv, axis=1)


if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def _haar_batch_nb(gaussians):
        out = np.empty_like(gaussians)
        b, d, _ = gaussians.shape
        for s in range(b):
            q, r = np.linalg.qr(np.ascontiguousarray(gaussians[s]))
            for j in range(d):
                rjj = r[j, j]
                a = abs(rjj)
                ph = rjj / a if a > 0 else 1.0 + 0j
                for i in range(d):
                    out[s, i, j] = q[i, j] * ph
        return out

    @numba.njit(cache=True, inline="always")
    def _mm_nb(a, b, out):
        # tiny-matrix product; explicit loops beat a BLAS call at these sizes
        d = a.shape[0]
        for i in range(d):
            for j in range(d):
                acc = 0j
                for k in range(d):
                    acc += a[i, k] * b[k, j]
                out[i, j] = acc

    @numba.njit(cache=True)
    def _fourth_moment_values_nb(us, a1, b1, a2, b2):
        n, d = us.shape[0], us.shape[1]
        out = np.empty(n, dtype=np.complex128)
        ud = np.empty((d, d), dtype=np.complex128)
        t1 = np.empty((d, d), dtype=np.complex128)
        x1 = np.empty((d, d), dtype=np.complex128)
        x2 = np.empty((d, d), dtype=np.complex128)
        z1 = np.empty((d, d), dtype=np.complex128)
        z2 = np.empty((d, d), dtype=np.complex128)
        for s in range(n):
            u = us[s]
            for i in range(d):
                for j in range(d):
                    ud[i, j] = np.conj(u[j, i])
            _mm_nb(u, b1, t1)
            _mm_nb(t1, ud, x1)
            _mm_nb(u, b2, t1)
            _mm_nb(t1, ud, x2)
            _mm_nb(x1, a1, z1)
            _mm_nb(x2, a2, z2)
            acc = 0j
            for i in range(d):
                for k in range(d):
                    acc += z1[i, k] * z2[k, i]
            out[s] = acc
        return out

    @numba.njit(cache=True)
    def _quad_form_batch_nb(vecs, t):
        b, n = vecs.shape
        tt = np.ascontiguousarray(t.T)
        tv = vecs @ tt
        out = np.empty(b, dtype=np.complex128)
        for s in range(b):
            acc = 0j
            for j in range(n):
                acc += np.conj(vecs[s, j]) * tv[s, j]
            out[s] = acc
        return out


def haar_batch(gaussians: np.ndarray) -> np.ndarray:
    """Turn a (count, d, d) batch of complex Gaussians into Haar unitaries.

    QR with the diagonal phase correction: U = Q diag(r_jj / |r_jj|), which
    removes the sign ambiguity of QR and makes the result Haar distributed.
    """
    gaussians = np.ascontiguousarray(gaussians, dtype=np.complex128)
    if _state["numba"]:
        try:
            return _haar_batch_nb(gaussians)
        except Exception:
            _state["numba"] = False
    return _haar_batch_np(gaussians)


def fourth_moment_values(us, a1, b1, a2, b2):
    """Per-sample values tr(U b1 U^dag a1 U b2 U^dag a2) for a batch of U."""
    us = np.ascontiguousarray(us, dtype=np.complex128)
    mats = [np.ascontiguousarray(m, dtype=np.complex128) for m in (a1, b1, a2, b2)]
    a1, b1, a2, b2 = mats
    if _state["numba"]:
        try:
            return _fourth_moment_values_nb(us, a1, b1, a2, b2)
        except Exception:
            _state["numba"] = False
    return _fourth_moment_values_np(us, a1, b1, a2, b2)


def quad_form_batch(vecs, t):
    """Values <v_s| t |v_s> for a batch of vectors (rows of vecs)."""
    vecs = np.ascontiguousarray(vecs, dtype=np.complex128)
    t = np.ascontiguousarray(t, dtype=np.complex128)
    if _state["numba"]:
        try:
            return _quad_form_batch_nb(vecs, t)
        except Exception:
            _state["numba"] = False
    return _quad_form_batch_np(vecs, t)
