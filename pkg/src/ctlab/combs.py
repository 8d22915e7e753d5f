"""Labelled operators, the link product, comb constraints, and testers.

Multi-round strategies are operators on labelled tensor factors. Keeping the
labels attached to the arrays lets the link product, causality recursions and
tester contractions align factors by name instead of by error-prone position
bookkeeping. Positions only matter at the numpy boundary; everything here
aligns by label first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, NamedTuple, Sequence

import numpy as np

from .channels import Channel, Dilation
from .linalg import (
    FactorLayout,
    min_eig,
    partial_trace,
    partial_transpose,
    permute_factors,
    psd_inv_sqrt,
    psd_sqrt,
    random_density,
    random_gaussian_matrix,
)

COMB_ATOL = 1e-8

__all__ = [
    "COMB_ATOL",
    "LabelledOperator",
    "identity_on",
    "link_product",
    "CombCheck",
    "is_deterministic_comb",
    "is_probabilistic_comb_certified",
    "Tester",
    "apply_tester",
    "sample_tester",
    "tester_from_state_povm",
    "random_parallel_tester",
]


@dataclass(frozen=True)
class LabelledOperator:
    """A square operator together with the layout of its tensor factors."""

    op: np.ndarray
    layout: FactorLayout

    def __post_init__(self):
        if not isinstance(self.layout, FactorLayout):
            object.__setattr__(self, "layout", FactorLayout(tuple(self.layout)))
        op = np.array(self.op, dtype=complex)
        d = self.layout.dim
        if op.shape != (d, d):
            raise ValueError(
                f"operator shape {op.shape} does not match layout dimension {d}"
            )
        op.setflags(write=False)
        object.__setattr__(self, "op", op)

    @property
    def labels(self) -> tuple:
        return self.layout.labels

    @property
    def dim(self) -> int:
        return self.layout.dim

    @property
    def scalar(self) -> complex:
        if len(self.layout) != 0:
            raise ValueError("operator still carries tensor factors")
        return complex(self.op[0, 0])

    def scaled(self, factor: complex) -> "LabelledOperator":
        return LabelledOperator(self.op * factor, self.layout)

    def aligned_to(self, target) -> "LabelledOperator":
        """Permute factors into the order of target (labels or a layout)."""
        labels = target.labels if isinstance(target, FactorLayout) else tuple(target)
        if set(labels) != set(self.labels) or len(labels) != len(self.labels):
            raise ValueError("alignment target must carry the same labels")
        if labels == self.labels:
            return self
        op = permute_factors(self.op, self.layout, labels)
        return LabelledOperator(op, self.layout.restricted(labels))

    def extended(self, target: FactorLayout) -> "LabelledOperator":
        """Tensor with identity on the factors of target not already present."""
        have = set(self.labels)
        for lab in self.labels:
            if lab not in target:
                raise ValueError(f"label {lab!r} missing from extension target")
            if target.dim_of(lab) != self.layout.dim_of(lab):
                raise ValueError(f"label {lab!r} changes dimension in extension")
        missing = tuple(f for f in target.factors if f[0] not in have)
        if not missing:
            return self.aligned_to(target)
        d_extra = 1
        for _, d in missing:
            d_extra *= d
        op = np.kron(self.op, np.eye(d_extra, dtype=complex))
        big = LabelledOperator(op, FactorLayout(self.layout.factors + missing))
        return big.aligned_to(target)

    def tensor(self, other: "LabelledOperator") -> "LabelledOperator":
        if set(self.labels) & set(other.labels):
            raise ValueError("tensor factors must carry distinct labels")
        return LabelledOperator(
            np.kron(self.op, other.op),
            FactorLayout(self.layout.factors + other.layout.factors),
        )

    def partial_trace(self, labels: Sequence) -> "LabelledOperator":
        labels = tuple(labels)
        if not labels:
            return self
        op = partial_trace(self.op, self.layout, labels)
        return LabelledOperator(op, self.layout.without(labels))

    def partial_transpose(self, labels: Sequence) -> "LabelledOperator":
        labels = tuple(labels)
        if not labels:
            return self
        op = partial_transpose(self.op, self.layout, labels)
        return LabelledOperator(op, self.layout)

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.op))


def identity_on(layout: FactorLayout) -> LabelledOperator:
    return LabelledOperator(np.eye(layout.dim, dtype=complex), layout)


def link_product(x: LabelledOperator, y: LabelledOperator) -> LabelledOperator:
    """Link product x * y, contracting the labels the two operands share.

    Both operands are extended by identity to the union of their factors, the
    first is partially transposed on the shared labels, and the product is
    traced over them. The result carries the x-exclusive factors followed by
    the y-exclusive ones; with full overlap it is a scalar (empty layout).
    """
    shared = [lab for lab in x.labels if lab in y.layout]
    for lab in shared:
        if x.layout.dim_of(lab) != y.layout.dim_of(lab):
            raise ValueError(f"shared label {lab!r} has mismatched dimensions")
    x_excl = [lab for lab in x.labels if lab not in y.layout]
    y_excl = [lab for lab in y.labels if lab not in x.layout]
    common = FactorLayout(
        tuple((lab, x.layout.dim_of(lab)) for lab in x_excl)
        + tuple((lab, x.layout.dim_of(lab)) for lab in shared)
        + tuple((lab, y.layout.dim_of(lab)) for lab in y_excl)
    )
    xe = x.extended(common).partial_transpose(shared)
    ye = y.extended(common)
    prod = LabelledOperator(xe.op @ ye.op, common)
    return prod.partial_trace(shared)


class CombCheck(NamedTuple):
    """Outcome of a causality check.

    failed_level is None on success, -1 for a positivity failure, j >= 1 for
    the normalization constraint at tooth j, and 0 for the final scalar.
    defect is the offending magnitude (worst observed one on success).
    """

    ok: bool
    failed_level: int | None
    defect: float

    def __bool__(self) -> bool:
        return self.ok


def _validate_ordering(x: LabelledOperator, ordering: Sequence) -> tuple:
    groups = tuple(tuple(g) for g in ordering)
    if len(groups) % 2 != 0 or not groups:
        raise ValueError("ordering must list an even number of label groups")
    seen: list = []
    for g in groups:
        seen.extend(g)
    if len(set(seen)) != len(seen):
        raise ValueError("ordering groups must be disjoint")
    if set(seen) != set(x.labels):
        raise ValueError("ordering must cover exactly the operator's labels")
    return groups


def is_deterministic_comb(
    x: LabelledOperator, ordering: Sequence, tol: float = COMB_ATOL
) -> CombCheck:
    """Check the causality constraints of a deterministic comb.

    ordering alternates input and output label groups,
    (in_1, out_1, ..., in_n, out_n); an empty group is a trivial factor.
    The recursion peels teeth from the back: tracing out out_j must leave
    identity on in_j tensored with the next comb down, and the fully
    contracted scalar must be 1.
    """
    groups = _validate_ordering(x, ordering)
    n = len(groups) // 2
    worst = max(0.0, -min_eig(x.op))
    if worst > tol:
        return CombCheck(False, -1, worst)
    cur = x
    for j in range(n, 0, -1):
        in_g, out_g = groups[2 * j - 2], groups[2 * j - 1]
        traced = cur.partial_trace(out_g)
        d_in = 1
        for lab in in_g:
            d_in *= traced.layout.dim_of(lab)
        nxt = traced.partial_trace(in_g).scaled(1.0 / d_in)
        if in_g:
            ident = identity_on(traced.layout.restricted(in_g))
            target = nxt.tensor(ident).aligned_to(traced.layout)
        else:
            target = nxt
        defect = float(np.max(np.abs(traced.op - target.op)))
        if defect > tol:
            return CombCheck(False, j, defect)
        worst = max(worst, defect)
        cur = nxt
    defect = abs(cur.scalar - 1.0)
    if defect > tol:
        return CombCheck(False, 0, float(defect))
    return CombCheck(True, None, max(worst, float(defect)))


def is_probabilistic_comb_certified(
    x: LabelledOperator,
    cert: LabelledOperator,
    ordering: Sequence,
    tol: float = COMB_ATOL,
) -> bool:
    """True when cert is a deterministic comb dominating the psd operator x."""
    if min_eig(x.op) < -tol:
        return False
    if not is_deterministic_comb(cert, ordering, tol):
        return False
    gap = cert.aligned_to(x.layout).op - x.op
    return min_eig(gap) >= -tol


@dataclass(frozen=True)
class Tester:
    """A quantum tester: POVM-like outcomes over a multi-query strategy.

    outcomes maps outcome labels to labelled operators; in_labels[j] and
    out_labels[j] are the label groups of the j-th query's input and output
    interfaces (the output group also carries an ancilla label when the
    tester probes dilations rather than channels). Group order is the
    significance order of the corresponding factors. kind selects the
    normalization that is enforced at construction: a parallel tester sums
    to rho on the inputs tensor identity on the outputs, a sequential one
    sums to a deterministic comb interleaving the query interfaces.
    """

    outcomes: tuple
    in_labels: tuple
    out_labels: tuple
    kind: str = "parallel"

    def __post_init__(self):
        outcomes = tuple((lab, op) for lab, op in self.outcomes)
        in_labels = tuple(tuple(g) for g in self.in_labels)
        out_labels = tuple(tuple(g) for g in self.out_labels)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "in_labels", in_labels)
        object.__setattr__(self, "out_labels", out_labels)
        if self.kind not in ("parallel", "sequential"):
            raise ValueError(f"unknown tester kind {self.kind!r}")
        if not outcomes:
            raise ValueError("a tester needs at least one outcome")
        names = [lab for lab, _ in outcomes]
        if len(set(names)) != len(names):
            raise ValueError("outcome labels must be distinct")
        if len(in_labels) != len(out_labels) or not in_labels:
            raise ValueError("need matching nonempty in/out label groups")
        flat: list = []
        for g in in_labels + out_labels:
            flat.extend(g)
        if len(set(flat)) != len(flat):
            raise ValueError("query label groups must be disjoint")
        expected = set(flat)
        ref = outcomes[0][1].layout
        if set(ref.labels) != expected:
            raise ValueError("outcome operators must cover the query labels")
        for lab, op in outcomes:
            if set(op.labels) != expected:
                raise ValueError(f"outcome {lab!r} carries the wrong labels")
            for f in op.layout.factors:
                if ref.dim_of(f[0]) != f[1]:
                    raise ValueError(f"outcome {lab!r} disagrees on dimensions")
            neg = -min_eig(op.op)
            if neg > COMB_ATOL:
                raise ValueError(f"outcome {lab!r} is not psd (defect {neg:.3e})")
        self._check_normalization()

    @property
    def n_queries(self) -> int:
        return len(self.in_labels)

    @property
    def outcome_names(self) -> tuple:
        return tuple(lab for lab, _ in self.outcomes)

    def _sum(self) -> LabelledOperator:
        ref = self.outcomes[0][1]
        total = ref.op.copy()
        for _, op in self.outcomes[1:]:
            total = total + op.aligned_to(ref.layout).op
        return LabelledOperator(total, ref.layout)

    def input_state(self) -> LabelledOperator:
        """Reduced input state on the query inputs, tr_out(sum) / dim_out."""
        s = self._sum()
        out_flat = [lab for g in self.out_labels for lab in g]
        d_out = 1
        for lab in out_flat:
            d_out *= s.layout.dim_of(lab)
        return s.partial_trace(out_flat).scaled(1.0 / d_out)

    def _check_normalization(self) -> None:
        s = self._sum()
        if self.kind == "parallel":
            rho = self.input_state()
            if abs(rho.trace - 1.0) > COMB_ATOL:
                raise ValueError("tester input state is not normalized")
            if min_eig(rho.op) < -COMB_ATOL:
                raise ValueError("tester input state is not psd")
            out_layout = s.layout.without(rho.labels)
            target = rho.tensor(identity_on(out_layout)).aligned_to(s.layout)
            defect = float(np.max(np.abs(s.op - target.op)))
            if defect > COMB_ATOL:
                raise ValueError(
                    f"parallel tester does not sum to rho x identity "
                    f"(defect {defect:.3e})"
                )
        else:
            ordering: list = [()]
            for j in range(self.n_queries):
                ordering.append(self.in_labels[j])
                ordering.append(self.out_labels[j])
            ordering.append(())
            check = is_deterministic_comb(s, ordering)
            if not check:
                raise ValueError(
                    f"sequential tester sum fails the comb constraint at level "
                    f"{check.failed_level} (defect {check.defect:.3e})"
                )


def _labelled_choi(process, out_group, in_group, ref: FactorLayout) -> LabelledOperator:
    """Choi operator of one query, labelled with the tester's groups."""
    out_dims = tuple(ref.dim_of(lab) for lab in out_group)
    in_dims = tuple(ref.dim_of(lab) for lab in in_group)
    d_out = 1
    for d in out_dims:
        d_out *= d
    d_in = 1
    for d in in_dims:
        d_in *= d
    if isinstance(process, Dilation):
        if d_out != process.anc_dim * process.d_out or d_in != process.d_in:
            raise ValueError("tester query dimensions do not match the dilation")
        op = process.choi_full()
    elif isinstance(process, Channel):
        if d_out != process.d_out or d_in != process.d_in:
            raise ValueError("tester query dimensions do not match the channel")
        op = process.choi
    else:
        raise TypeError(f"cannot apply a tester to {type(process).__name__}")
    layout = FactorLayout(tuple(zip(out_group, out_dims)) + tuple(zip(in_group, in_dims)))
    return LabelledOperator(op, layout)


def apply_tester(tester: Tester, process) -> np.ndarray:
    """Outcome probabilities of running the tester on n copies of process.

    The process (a Channel, or a Dilation when the tester carries ancilla
    factors) is queried once per in/out group pair; probabilities come out
    in the order of tester.outcomes.
    """
    ref = tester.outcomes[0][1].layout
    full = None
    for j in range(tester.n_queries):
        block = _labelled_choi(process, tester.out_labels[j], tester.in_labels[j], ref)
        full = block if full is None else full.tensor(block)
    probs = np.empty(len(tester.outcomes))
    for i, (_, op) in enumerate(tester.outcomes):
        probs[i] = link_product(op, full).scalar.real
    return probs


def sample_tester(
    tester: Tester, process, shots: int, rng: np.random.Generator
) -> dict:
    """Multinomial counts of tester outcomes over the given number of shots."""
    p = apply_tester(tester, process)
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if total <= 0:
        raise ValueError("tester probabilities sum to zero")
    counts = rng.multinomial(shots, p / total)
    return {lab: int(c) for lab, c in zip(tester.outcome_names, counts)}


def tester_from_state_povm(
    rho: LabelledOperator, povm: Sequence
) -> Tester:
    """Single-query parallel tester from an input state and a measurement.

    rho lives on the query input factors plus any auxiliary ones; each povm
    entry is (outcome label, effect) with the effect on the query output
    factors plus the same auxiliaries. The shared labels are contracted:
    T_i = E_i^T * rho under the link product.
    """
    povm = tuple((lab, op) for lab, op in povm)
    if not povm:
        raise ValueError("need at least one effect")
    e0 = povm[0][1]
    out_group = tuple(lab for lab in e0.labels if lab not in rho.layout)
    in_group = tuple(lab for lab in rho.labels if lab not in e0.layout)
    outcomes = []
    for lab, e in povm:
        et = LabelledOperator(e.op.T, e.layout)
        outcomes.append((lab, link_product(et, rho)))
    return Tester(
        outcomes=tuple(outcomes),
        in_labels=(in_group,),
        out_labels=(out_group,),
        kind="parallel",
    )


def random_parallel_tester(
    n_queries: int,
    d_in: int,
    d_out: int,
    n_outcomes: int,
    rng: np.random.Generator,
    anc_dim: int | None = None,
) -> Tester:
    """Random parallel tester on n_queries copies of a d_in -> d_out process.

    When anc_dim is given the output groups carry an extra ancilla factor,
    producing a tester for dilations of that ancilla size. The construction
    conjugates random psd blocks G_i into a resolution of rho x identity:
    T_i = X G_i X^dag with X = (rho x I)^(1/2) S^(-1/2), S = sum G_i.
    """
    factors_in = tuple((("A", j), d_in) for j in range(n_queries))
    factors_out: tuple = ()
    for j in range(n_queries):
        if anc_dim is not None:
            factors_out += ((("anc", j), anc_dim),)
        factors_out += ((("B", j), d_out),)
    layout = FactorLayout(factors_in + factors_out)
    d_total = layout.dim
    d_a = d_in**n_queries
    rho = random_density(d_a, rng)
    gs = []
    for _ in range(n_outcomes):
        g = random_gaussian_matrix(d_total, d_total, rng)
        gs.append(g @ g.conj().T)
    s = sum(gs)
    x = psd_sqrt(np.kron(rho, np.eye(d_total // d_a))) @ psd_inv_sqrt(s)
    outcomes = tuple(
        (i, LabelledOperator(x @ g @ x.conj().T, layout)) for i, g in enumerate(gs)
    )
    if anc_dim is not None:
        out_groups = tuple((("anc", j), ("B", j)) for j in range(n_queries))
    else:
        out_groups = tuple((("B", j),) for j in range(n_queries))
    return Tester(
        outcomes=outcomes,
        in_labels=tuple((("A", j),) for j in range(n_queries)),
        out_labels=out_groups,
        kind="parallel",
    )
