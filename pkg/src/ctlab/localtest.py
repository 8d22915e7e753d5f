"""Reduction of dilation testers to channel testers.

A tester that probes a fixed dilation (ancilla factors included) only sees
the dilation up to a left unitary on the ancilla. Averaging that unitary
turns the tester into an ancilla-twirled one, and the twirled tester's
statistics on any rank-r dilation can be reproduced by a tester that acts on
copies of the channel alone. This module builds that localized tester and
cross-checks the identity along three routes: localized probabilities on the
channel, twirled probabilities on the canonical dilation, and a Monte Carlo
average over random dilations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _accel
from .channels import Channel, dilate
from .combs import LabelledOperator, Tester, apply_tester
from .linalg import (
    FactorLayout,
    haar_unitaries,
    partial_trace,
    permute_factors,
    swap_operator,
)
from .moments import twirl1, twirl2

__all__ = [
    "average_tester",
    "LocalizedTester",
    "localize_tester",
    "DilationCheck",
    "verify_dilation_identity",
]

PERP_LABEL = "perp"


def _find_anc_labels(tester: Tester, anc_labels) -> tuple:
    """One ancilla label per query, either given or detected by name."""
    if anc_labels is not None:
        anc_labels = tuple(anc_labels)
        if len(anc_labels) != tester.n_queries:
            raise ValueError("need one ancilla label per query")
        for j, lab in enumerate(anc_labels):
            if lab not in tester.out_labels[j]:
                raise ValueError(f"label {lab!r} is not in query {j}'s output group")
        return anc_labels
    found = []
    for j, group in enumerate(tester.out_labels):
        hits = [
            lab
            for lab in group
            if isinstance(lab, tuple) and len(lab) == 2 and lab[0] == "anc"
        ]
        if len(hits) != 1:
            raise ValueError(
                f"query {j} must carry exactly one ancilla factor (found {hits!r})"
            )
        found.append(hits[0])
    return tuple(found)


def _anc_dim(tester: Tester, anc_labels: tuple) -> int:
    ref = tester.outcomes[0][1].layout
    dims = {ref.dim_of(lab) for lab in anc_labels}
    if len(dims) != 1:
        raise ValueError("ancilla factors must share one dimension")
    return dims.pop()


def average_tester(tester: Tester, anc_labels=None) -> Tester:
    """Twirl every outcome over a shared Haar unitary on the ancilla factors.

    Supported for one or two queries (first and second moment twirls).
    """
    anc_labels = _find_anc_labels(tester, anc_labels)
    n = tester.n_queries
    outcomes = []
    for lab, op in tester.outcomes:
        if n == 1:
            avg = twirl1(op.op, op.layout, anc_labels[0])
        elif n == 2:
            avg = twirl2(op.op, op.layout, anc_labels)
        else:
            raise ValueError("ancilla twirls are implemented for n <= 2 queries")
        outcomes.append((lab, LabelledOperator(avg, op.layout)))
    return Tester(
        outcomes=tuple(outcomes),
        in_labels=tester.in_labels,
        out_labels=tester.out_labels,
        kind=tester.kind,
    )


@dataclass(frozen=True)
class LocalizedTester:
    """Channel-side tester reproducing a dilation tester's twirled statistics.

    tester acts on n copies of the channel and carries one extra outcome
    labelled "perp": the statistical weight a rank-r dilation can never
    reach. r is the ancilla dimension that was localized away.
    """

    tester: Tester
    r: int

    @property
    def perp_index(self) -> int:
        return len(self.tester.outcomes) - 1


def _single_label(group, what: str):
    if len(group) != 1:
        raise ValueError(f"localization expects one factor per {what} interface")
    return group[0]


def localize_tester(tester: Tester, anc_labels=None) -> LocalizedTester:
    """Remove the ancilla factors of a parallel dilation tester.

    One query: the localized outcome is tr_anc(T_i) / r. Two queries: split
    into symmetric and antisymmetric sectors of the pair swaps,

        T~_i = sum_l (1/dim Q_l) tr_anc[(P_AB_l (x) P_anc_l) T_i (same)],

    summing over the sectors the rank-r ancilla supports; the sectors it
    cannot reach contribute a residual outcome "perp" built from the
    symmetrized input state, making the result a valid parallel tester.
    """
    if tester.kind != "parallel":
        raise ValueError("localization is defined for parallel testers")
    anc_labels = _find_anc_labels(tester, anc_labels)
    r = _anc_dim(tester, anc_labels)
    n = tester.n_queries
    if any(lab == PERP_LABEL for lab in tester.outcome_names):
        raise ValueError(f"outcome label {PERP_LABEL!r} is reserved")
    a_labels = [_single_label(g, "input") for g in tester.in_labels]
    b_labels = []
    for j, group in enumerate(tester.out_labels):
        rest = tuple(lab for lab in group if lab != anc_labels[j])
        b_labels.append(_single_label(rest, "output"))
    ref = tester.outcomes[0][1].layout
    d1 = ref.dim_of(a_labels[0])
    d2 = ref.dim_of(b_labels[0])
    if any(ref.dim_of(lab) != d1 for lab in a_labels):
        raise ValueError("query input dimensions must match")
    if any(ref.dim_of(lab) != d2 for lab in b_labels):
        raise ValueError("query output dimensions must match")

    if n == 1:
        order = [a_labels[0], b_labels[0], anc_labels[0]]
        chan_layout = FactorLayout(((a_labels[0], d1), (b_labels[0], d2)))
        outcomes = []
        for lab, op in tester.outcomes:
            m = op.aligned_to(order)
            loc = partial_trace(m.op, m.layout, [anc_labels[0]]) / r
            outcomes.append((lab, LabelledOperator(loc, chan_layout)))
        perp = LabelledOperator(
            np.zeros((d1 * d2, d1 * d2), dtype=complex), chan_layout
        )
    elif n == 2:
        order = [a_labels[0], b_labels[0], a_labels[1], b_labels[1]] + list(anc_labels)
        chan_layout = FactorLayout(
            (
                (a_labels[0], d1),
                (b_labels[0], d2),
                (a_labels[1], d1),
                (b_labels[1], d2),
            )
        )
        dab = d1 * d2
        s_ab = swap_operator(dab)
        s_anc = swap_operator(r)
        eye_ab = np.eye(dab * dab, dtype=complex)
        eye_anc = np.eye(r * r, dtype=complex)
        proj_ab = {+1: (eye_ab + s_ab) / 2, -1: (eye_ab - s_ab) / 2}
        proj_anc = {+1: (eye_anc + s_anc) / 2, -1: (eye_anc - s_anc) / 2}
        dim_q = {+1: r * (r + 1) // 2, -1: r * (r - 1) // 2}
        dims6 = (d1, d2, d1, d2, r, r)
        outcomes = []
        for lab, op in tester.outcomes:
            m = op.aligned_to(order).op
            acc = np.zeros((dab * dab, dab * dab), dtype=complex)
            for sector in (+1, -1):
                if dim_q[sector] == 0:
                    continue
                big = np.kron(proj_ab[sector], proj_anc[sector])
                traced = partial_trace(big @ m @ big, dims6, [4, 5])
                acc += traced / dim_q[sector]
            outcomes.append((lab, LabelledOperator(acc, chan_layout)))
        rho = tester.input_state().aligned_to(a_labels)
        s_a = swap_operator(d1)
        rho_sym = (rho.op + s_a @ rho.op @ s_a) / 2
        base = np.kron(rho_sym, np.eye(d2 * d2, dtype=complex))
        base = permute_factors(base, (d1, d1, d2, d2), [0, 2, 1, 3])
        perp_op = np.zeros_like(base)
        for sector in (+1, -1):
            dim_ab = dab * (dab + sector) // 2
            if dim_ab > 0 and dim_q[sector] == 0:
                perp_op += proj_ab[sector] @ base @ proj_ab[sector]
        perp = LabelledOperator(perp_op, chan_layout)
    else:
        raise ValueError("localization is implemented for n <= 2 queries")

    loc_tester = Tester(
        outcomes=tuple(outcomes) + ((PERP_LABEL, perp),),
        in_labels=tuple((lab,) for lab in a_labels),
        out_labels=tuple((lab,) for lab in b_labels),
        kind="parallel",
    )
    return LocalizedTester(tester=loc_tester, r=r)


@dataclass(frozen=True)
class DilationCheck:
    """Three-route comparison of a dilation tester's twirled statistics."""

    outcome_names: tuple
    localized: np.ndarray
    fixed: np.ndarray
    mc_mean: np.ndarray
    mc_stderr: np.ndarray
    n_samples: int
    max_fixed_dev: float
    max_sigma_dev: float
    ok: bool

    @property
    def perp_probability(self) -> float:
        return float(self.localized[-1])


def _dilation_vectors(
    base_matrix: np.ndarray, n: int, count: int, r: int, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized Choi vectors of (U (x) 1) V for a batch of Haar U."""
    us = haar_unitaries(r, count, rng)
    rows, d1 = base_matrix.shape
    d2 = rows // r
    v0 = np.ascontiguousarray(base_matrix.reshape(r, d2, d1))
    w = np.einsum("skl,lba->skba", us, v0).reshape(count, rows * d1)
    if n == 1:
        return w
    v2 = np.einsum("sx,sy->sxy", w, w)
    return v2.reshape(count, (rows * d1) ** 2)


def verify_dilation_identity(
    tester: Tester,
    channel: Channel,
    *,
    samples: int = 10_000,
    rng: np.random.Generator,
    anc_labels=None,
    fixed_tol: float = 1e-7,
    sigma: float = 5.0,
) -> DilationCheck:
    """Check localized = twirled-on-dilation = average-over-dilations.

    Route (a) applies the localized tester to copies of the channel, route
    (b) applies the ancilla-twirled tester to the canonical rank-r dilation
    (these must agree to fixed_tol), and route (c) Monte Carlo averages the
    raw tester over random dilations (must agree within sigma standard
    errors).
    """
    anc_labels = _find_anc_labels(tester, anc_labels)
    r = _anc_dim(tester, anc_labels)
    n = tester.n_queries
    loc = localize_tester(tester, anc_labels)
    localized = apply_tester(loc.tester, channel)
    base = dilate(channel, r)
    fixed = apply_tester(average_tester(tester, anc_labels), base)

    a_labels = [_single_label(g, "input") for g in tester.in_labels]
    b_labels = []
    for j, group in enumerate(tester.out_labels):
        rest = tuple(lab for lab in group if lab != anc_labels[j])
        b_labels.append(_single_label(rest, "output"))
    order = []
    for j in range(n):
        order += [anc_labels[j], b_labels[j], a_labels[j]]
    vecs = _dilation_vectors(base.matrix, n, samples, r, rng)
    vbar = np.ascontiguousarray(np.conj(vecs))
    mc_mean = np.empty(len(tester.outcomes))
    mc_stderr = np.empty(len(tester.outcomes))
    for i, (_, op) in enumerate(tester.outcomes):
        t_aligned = np.ascontiguousarray(op.aligned_to(order).op)
        vals = _accel.quad_form_batch(vbar, t_aligned).real
        mc_mean[i] = vals.mean()
        mc_stderr[i] = vals.std(ddof=1) / np.sqrt(samples) if samples > 1 else np.inf

    k = len(tester.outcomes)
    max_fixed_dev = float(np.max(np.abs(localized[:k] - fixed)))
    denom = np.maximum(mc_stderr, 1e-12)
    max_sigma_dev = float(np.max(np.abs(localized[:k] - mc_mean) / denom))
    ok = max_fixed_dev <= fixed_tol and max_sigma_dev <= sigma
    return DilationCheck(
        outcome_names=loc.tester.outcome_names,
        localized=localized,
        fixed=fixed,
        mc_mean=mc_mean,
        mc_stderr=mc_stderr,
        n_samples=samples,
        max_fixed_dev=max_fixed_dev,
        max_sigma_dev=max_sigma_dev,
        ok=ok,
    )
