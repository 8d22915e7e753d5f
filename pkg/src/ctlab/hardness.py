"""Hard instance families for channel discrimination, and packing nets.

Four constructions of isometry families V = V0 + eps * (rotated direction),
one per parameter regime, together with the Monte Carlo moment experiments,
Lipschitz probes, and sampled packing nets that certify their separation
properties numerically.  Matrices built here keep the visible output factor
most significant in the row index (row = b * r + k for output level b and
ancilla level k); use HardInstance.dilation() to convert to the package's
ancilla-major convention.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from itertools import combinations

import numpy as np

from .channels import Channel, Dilation, Isometry, channel_to_json
from .combs import COMB_ATOL, CombCheck, LabelledOperator
from .linalg import FactorLayout, haar_unitary, min_eig, trace_norm
from .metrics import choi_trace_distance, diamond_distance

__all__ = [
    "Regime",
    "HardInstance",
    "build_type1",
    "build_type2",
    "build_instance",
    "kraus_partition",
    "GammaFamily",
    "type1_gamma_family",
    "type2_gamma_family",
    "gamma_vector",
    "certify_gamma_comb",
    "d_statistic",
    "amplitude_statistic",
    "choi_cross_statistic",
    "diamond_cross_statistic",
    "StatRecord",
    "MomentReport",
    "moment_experiment",
    "PackingNet",
    "sample_packing_net",
    "LipschitzRecord",
    "LipschitzReport",
    "lipschitz_probe",
]


class Regime(str, Enum):
    """Parameter regime of a hard instance family."""

    TYPE1 = "type1"
    TYPE2_NEAR = "type2-near"
    TYPE2_MID = "type2-mid"
    TYPE2_LARGE = "type2-large"


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValueError(message)


def _check_eps(eps: float) -> float:
    eps = float(eps)
    _require(0.0 <= eps < 0.5, f"eps must lie in [0, 1/2), got {eps}")
    return eps


def _regime_params(regime: Regime, d1: int, d2: int, r: int) -> dict:
    """Validate the regime inequalities and derive the window geometry.

    Returns a dict with the embedding parameters used by the builders and
    the statistics: 'haar_dim' (size of the Haar-rotated block), 'base'
    (first row of that block), 'm' (number of perturbed input columns) and
    regime-specific extras.
    """
    d1, d2, r = int(d1), int(d2), int(r)
    _require(d1 >= 1 and d2 >= 1 and r >= 1, "dimensions must be positive")
    big = r * d2
    if regime == Regime.TYPE1:
        _require(d1 >= 2, "type1 needs d1 >= 2")
        _require(d1 <= big, f"type1 needs d1 <= r*d2, got {d1} > {big}")
        _require(3 * big <= 4 * d1, f"type1 needs 3*r*d2 <= 4*d1, got 3*{big} > 4*{d1}")
        _require(2 * r <= d1 * d2, f"needs 2*r <= d1*d2, got 2*{r} > {d1 * d2}")
        dp = 2 * (d1 // 2)
        return {"haar_dim": dp, "base": 0, "m": d1, "dp": dp}
    _require(d2 >= 2, "type2 needs d2 >= 2")
    _require(2 * r <= d1 * d2, f"needs 2*r <= d1*d2, got 2*{r} > {d1 * d2}")
    if regime == Regime.TYPE2_NEAR:
        _require(big > d1, f"near-boundary needs r*d2 > d1, got {big} <= {d1}")
        _require(big < d1 + r, f"near-boundary needs r*d2 < d1 + r, got {big} >= {d1 + r}")
        eta = d1 - r * (d2 - 1)
        m = big - d1
        return {
            "haar_dim": m,
            "base": r * (d2 - 1),
            "m": m,
            "eta": eta,
            "m_diam": m,
            "kappa": min((big - d1) / d1, 1.0),
        }
    if regime == Regime.TYPE2_MID:
        _require(d1 + r <= big, f"mid regime needs d1 + r <= r*d2, got {d1 + r} > {big}")
        _require(r <= d1, f"mid regime needs r <= d1, got {r} > {d1}")
        chi_lo = d1 // r
        chi_hi = -(-d1 // r)
        zeta = min(chi_lo, d2 - chi_hi)
        return {
            "haar_dim": r * (d2 - chi_hi),
            "base": r * chi_hi,
            "m": r * zeta,
            "zeta": zeta,
            "chi_hi": chi_hi,
            "m_diam": r * zeta,
            "kappa": min((big - d1) / d1, 1.0),
        }
    if regime == Regime.TYPE2_LARGE:
        _require(d1 + r <= big, f"large-rank regime needs d1 + r <= r*d2, got {d1 + r} > {big}")
        _require(d1 < r, f"large-rank regime needs d1 < r, got {d1} >= {r}")
        chi = -(-r // d1)
        return {"haar_dim": r * (d2 - chi), "base": r * chi, "m": d1, "chi": chi}
    raise ValueError(f"unknown regime {regime!r}")


# ---------------------------------------------------------------------------
# Orthogonal unitary families and the Kraus partition lemma
# ---------------------------------------------------------------------------


def _weyl(dim: int, a: int, b: int) -> np.ndarray:
    """Clock-and-shift unitary X^a Z^b on `dim` levels."""
    omega = np.exp(2j * np.pi / dim)
    u = np.zeros((dim, dim), dtype=complex)
    for k in range(dim):
        u[(k + a) % dim, k] = omega ** (b * k)
    return u


def kraus_partition(d1: int, d2: int, r: int) -> list:
    """A trace-orthogonal Kraus set spreading identity evenly over r slots.

    Returns r operators K_i of shape (d2, d1) with sum K_i^dag K_i = I,
    tr(K_i^dag K_j) = 0 for i != j, and tr(K_i^dag K_i) <= 2*d1/r; trailing
    operators may be zero.
    """
    d1, d2, r = int(d1), int(d2), int(r)
    _require(d1 >= 1 and d2 >= 1 and r >= 1, "dimensions must be positive")
    _require(d1 <= r * d2, f"needs d1/d2 <= r, got d1={d1}, d2={d2}, r={r}")
    _require(r <= d1 * d2, f"needs r <= d1*d2, got r={r}, d1*d2={d1 * d2}")
    ops: list = []
    if d1 <= d2:
        blocks = d2 // d1
        want = -(-r // 2)
        assert want <= blocks * d1 * d1, "not enough orthogonal unitaries"
        scale = 1.0 / math.sqrt(want)
        for idx in range(want):
            block, pauli = divmod(idx, d1 * d1)
            a, b = divmod(pauli, d1)
            k = np.zeros((d2, d1), dtype=complex)
            k[block * d1 : (block + 1) * d1, :] = scale * _weyl(d1, a, b)
            ops.append(k)
    else:
        blocks = d1 // d2
        d3 = d1 - blocks * d2
        per_block = -(-r // (2 * blocks))
        assert per_block <= d2 * d2, "per-block unitary budget exceeded"
        scale = 1.0 / math.sqrt(per_block)
        for block in range(blocks):
            for j in range(per_block):
                a, b = divmod(j, d2)
                k = np.zeros((d2, d1), dtype=complex)
                k[:, block * d2 : (block + 1) * d2] = scale * _weyl(d2, a, b)
                ops.append(k)
        if d3 > 0:
            rows = d2 // d3
            extra = -(-(r * d3) // (2 * d1))
            assert extra <= rows * d3 * d3, "remainder isometry budget exceeded"
            scale3 = 1.0 / math.sqrt(extra)
            for idx in range(extra):
                row, pauli = divmod(idx, d3 * d3)
                a, b = divmod(pauli, d3)
                k = np.zeros((d2, d1), dtype=complex)
                k[row * d3 : (row + 1) * d3, d1 - d3 :] = scale3 * _weyl(d3, a, b)
                ops.append(k)
    assert len(ops) <= r, f"partition produced {len(ops)} operators for r={r}"
    while len(ops) < r:
        ops.append(np.zeros((d2, d1), dtype=complex))
    return ops


# ---------------------------------------------------------------------------
# Hard instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HardInstance:
    """One sampled member V = v0 + eps * direction of a hard family.

    All matrices are (r*d2) x d1 with the visible output factor most
    significant in the row index.  `delta` is the fixed perturbation
    template, `direction` the Haar-rotated copy actually added (both without
    the eps factor), and `u` the sampled unitary on the rotated block.
    `v0_core` is the sub-center whose ancilla row blocks satisfy the
    trace-orthogonality bounds (it differs from v0 only in the
    near-boundary regime, where the center carries an extra tail).
    """

    regime: Regime
    d1: int
    d2: int
    r: int
    eps: float
    v0: np.ndarray
    v0_core: np.ndarray
    delta: np.ndarray
    direction: np.ndarray
    u: np.ndarray
    matrix: np.ndarray

    @property
    def dims(self) -> tuple:
        return (self.d1, self.d2, self.r)

    @property
    def iso(self) -> Isometry:
        return Isometry(self.matrix)

    def dilation(self) -> Dilation:
        """Reorder rows to the ancilla-major convention and wrap."""
        d2, r = self.d2, self.r
        perm = np.empty(r * d2, dtype=int)
        for k in range(r):
            for b in range(d2):
                perm[k * d2 + b] = b * r + k
        return Dilation(self.matrix[perm, :], r, d2)

    def channel(self) -> Channel:
        return self.dilation().contract()

    def anc_blocks(self, core: bool = True) -> tuple:
        """The d2 x d1 row blocks K_i of the center, one per ancilla level."""
        src = self.v0_core if core else self.v0
        return tuple(src[np.arange(self.d2) * self.r + i, :] for i in range(self.r))


def _assemble(regime: Regime, d1: int, d2: int, r: int, eps: float, u: np.ndarray) -> HardInstance:
    params = _regime_params(regime, d1, d2, r)
    eps = _check_eps(eps)
    big = r * d2
    damp = math.sqrt(1.0 - eps * eps)
    v0 = np.zeros((big, d1), dtype=complex)
    delta = np.zeros((big, d1), dtype=complex)
    m = params["m"]
    base = params["base"]
    if regime == Regime.TYPE1:
        dp = params["dp"]
        half = d1 // 2
        for i in range(d1):
            v0[i, i] = damp if i < dp else 1.0
        for i in range(dp):
            delta[i, i] = 1j if i < half else -1j
        rot = np.zeros((big, d1), dtype=complex)
        rot[:dp, :dp] = u @ delta[:dp, :dp] @ u.conj().T
        direction = rot
        v0_core = v0
    else:
        if regime == Regime.TYPE2_NEAR:
            eta = params["eta"]
            nfull = r * (d2 - 1)
            for a in range(nfull):
                v0[a, a] = damp if a < m else 1.0
            v0_core = v0.copy()
            for t in range(eta):
                v0[big - eta + t, nfull + t] = 1.0
        elif regime == Regime.TYPE2_MID:
            for a in range(d1):
                v0[a, a] = damp if a < m else 1.0
            v0_core = v0
        else:
            chi = params["chi"]
            for i, k in enumerate(kraus_partition(d1, chi, r)):
                v0[np.arange(chi) * r + i, :] = damp * k
            v0_core = v0
        for t in range(m):
            delta[base + t, t] = 1.0
        direction = np.zeros((big, d1), dtype=complex)
        direction[base : base + params["haar_dim"], :m] = u[:, :m]
    matrix = v0 + eps * direction
    return HardInstance(
        regime=regime,
        d1=d1,
        d2=d2,
        r=r,
        eps=eps,
        v0=v0,
        v0_core=v0_core,
        delta=delta,
        direction=direction,
        u=u,
        matrix=matrix,
    )


def build_type1(d1: int, d2: int, r: int, eps: float, rng: np.random.Generator) -> HardInstance:
    """Sample a near-square instance V = V0 + eps * U Delta U^dag."""
    params = _regime_params(Regime.TYPE1, d1, d2, r)
    return _assemble(Regime.TYPE1, d1, d2, r, eps, haar_unitary(params["haar_dim"], rng))


def build_type2(
    regime: Regime | str, d1: int, d2: int, r: int, eps: float, rng: np.random.Generator
) -> HardInstance:
    """Sample a type II instance V = center + eps * U Delta."""
    regime = Regime(regime)
    _require(regime != Regime.TYPE1, "use build_type1 for the near-square regime")
    params = _regime_params(regime, d1, d2, r)
    return _assemble(regime, d1, d2, r, eps, haar_unitary(params["haar_dim"], rng))


def build_instance(
    regime: Regime | str, d1: int, d2: int, r: int, eps: float, rng: np.random.Generator
) -> HardInstance:
    regime = Regime(regime)
    if regime == Regime.TYPE1:
        return build_type1(d1, d2, r, eps, rng)
    return build_type2(regime, d1, d2, r, eps, rng)


# ---------------------------------------------------------------------------
# Cross-term statistics
# ---------------------------------------------------------------------------


def _tr_anc_outer(m_op: np.ndarray, n_op: np.ndarray, d2: int, r: int) -> np.ndarray:
    """tr_anc(|m_op>><<n_op|) as an operator on the output x input factors."""
    cols = m_op.shape[1]
    mm = m_op.reshape(d2, r, cols)
    nn = n_op.conj().reshape(d2, r, n_op.shape[1])
    out = np.einsum("bka,cke->bace", mm, nn)
    return out.reshape(d2 * cols, d2 * n_op.shape[1])


def _pair_guard(x: HardInstance, y: HardInstance) -> None:
    if x.regime != y.regime or x.dims != y.dims or x.eps != y.eps:
        raise ValueError("instances must share regime, dimensions and eps")


def d_statistic(x: HardInstance, y: HardInstance) -> np.ndarray:
    """Hermitian overlap statistic D = A_x + A_x^dag - A_y - A_y^dag."""
    _pair_guard(x, y)
    _require(x.regime == Regime.TYPE1, "d_statistic applies to type1 instances")
    ax = _tr_anc_outer(x.direction, x.v0, x.d2, x.r)
    ay = _tr_anc_outer(y.direction, y.v0, y.d2, y.r)
    return ax + ax.conj().T - ay - ay.conj().T


def amplitude_statistic(x: HardInstance) -> float:
    """tr(A A^dag) for the type1 overlap matrix A = tr_anc(|U Delta U^dag>><<V0|)."""
    _require(x.regime == Regime.TYPE1, "amplitude_statistic applies to type1 instances")
    a = _tr_anc_outer(x.direction, x.v0, x.d2, x.r)
    return float(np.sum(np.abs(a) ** 2))


def choi_cross_statistic(x: HardInstance, y: HardInstance) -> np.ndarray:
    """The normalized cross term F driving the Choi trace-norm separation."""
    _pair_guard(x, y)
    _require(x.regime != Regime.TYPE1, "type1 uses d_statistic instead")
    center = x.v0
    if x.regime == Regime.TYPE2_LARGE:
        center = x.v0 / math.sqrt(1.0 - x.eps * x.eps)
    diff = x.direction - y.direction
    return _tr_anc_outer(center, diff, x.d2, x.r) / x.d1


def diamond_cross_statistic(x: HardInstance, y: HardInstance) -> np.ndarray:
    """The cross term built from the entangled-input witness W0."""
    _pair_guard(x, y)
    _require(
        x.regime in (Regime.TYPE2_NEAR, Regime.TYPE2_MID),
        "diamond witness exists for the near-boundary and mid regimes only",
    )
    params = _regime_params(x.regime, x.d1, x.d2, x.r)
    m_diam = params["m_diam"]
    w0 = np.zeros((x.r * x.d2, x.d1), dtype=complex)
    damp = math.sqrt(1.0 - x.eps * x.eps)
    for t in range(m_diam):
        w0[t, t] = damp
    diff = x.direction - y.direction
    return _tr_anc_outer(w0, diff, x.d2, x.r) / m_diam


# ---------------------------------------------------------------------------
# Moment experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StatRecord:
    """One Monte Carlo estimate checked against a one-sided bound."""

    name: str
    mean: float
    stderr: float
    bound: float
    kind: str
    ok: bool


@dataclass(frozen=True)
class MomentReport:
    regime: Regime
    d1: int
    d2: int
    r: int
    eps: float
    n_pairs: int
    records: tuple

    @property
    def all_ok(self) -> bool:
        return all(rec.ok for rec in self.records)


def _record(name: str, values: np.ndarray, bound: float, kind: str, sigmas: float = 5.0) -> StatRecord:
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
    # tiny absolute slack so statistics that sit exactly on their bound
    # (zero variance) are not flipped by rounding
    slack = 1e-10 * max(1.0, abs(bound))
    if kind == "lower":
        ok = mean + sigmas * stderr >= bound - slack
    else:
        ok = mean - sigmas * stderr <= bound + slack
    return StatRecord(name=name, mean=mean, stderr=stderr, bound=bound, kind=kind, ok=ok)


def moment_experiment(
    regime: Regime | str,
    d1: int,
    d2: int,
    r: int,
    eps: float,
    *,
    pairs: int = 200,
    rng: np.random.Generator | None = None,
) -> MomentReport:
    """Estimate the second and fourth moments of the separation statistics.

    Draws `pairs` independent (U_x, U_y) couples and compares the sample
    means of tr|D|^2 / tr|D|^4 (type1) or tr|F|^2 / tr|F|^4 (type2, Choi
    and, where defined, diamond witness variants) against the stated
    lower/upper bounds at five standard errors.
    """
    regime = Regime(regime)
    rng = np.random.default_rng(0) if rng is None else rng
    _require(pairs >= 2, "need at least two pairs for a standard error")
    params = _regime_params(regime, d1, d2, r)
    eps = _check_eps(eps)

    columns: dict = {}

    def push(name: str, value: float) -> None:
        columns.setdefault(name, []).append(value)

    for _ in range(int(pairs)):
        x = _assemble(regime, d1, d2, r, eps, haar_unitary(params["haar_dim"], rng))
        y = _assemble(regime, d1, d2, r, eps, haar_unitary(params["haar_dim"], rng))
        if regime == Regime.TYPE1:
            dmat = d_statistic(x, y)
            push("tr|D|^2", float(np.sum(np.abs(dmat) ** 2)))
            d2mat = dmat @ dmat
            push("tr|D|^4", float(np.sum(np.abs(d2mat) ** 2)))
            push("tr(A A^dag)", amplitude_statistic(x))
        else:
            f = choi_cross_statistic(x, y)
            push("choi tr|F|^2", float(np.sum(np.abs(f) ** 2)))
            gram = f.conj().T @ f
            push("choi tr|F|^4", float(np.sum(np.abs(gram) ** 2)))
            if regime in (Regime.TYPE2_NEAR, Regime.TYPE2_MID):
                fd = diamond_cross_statistic(x, y)
                push("diam tr|F|^2", float(np.sum(np.abs(fd) ** 2)))
                gram_d = fd.conj().T @ fd
                push("diam tr|F|^4", float(np.sum(np.abs(gram_d) ** 2)))

    records = []
    if regime == Regime.TYPE1:
        dp = params["dp"]
        records.append(_record("tr|D|^2", np.array(columns["tr|D|^2"]), d1 * d1 / (20.0 * r), "lower"))
        records.append(
            _record("tr|D|^4", np.array(columns["tr|D|^4"]), 12288.0 * d1**4 / r**3, "upper")
        )
        records.append(
            _record(
                "tr(A A^dag)",
                np.array(columns["tr(A A^dag)"]),
                (1.0 - eps * eps) * (d1 // r) * dp,
                "lower",
            )
        )
    else:
        if regime == Regime.TYPE2_NEAR:
            lo2, hi4 = params["kappa"] / (2.0 * r), 256.0 / r**3
        elif regime == Regime.TYPE2_MID:
            lo2, hi4 = params["kappa"] / (4.0 * r), 256.0 / r**3
        else:
            lo2, hi4 = 1.0 / r, 384.0 / r**3
        records.append(_record("choi tr|F|^2", np.array(columns["choi tr|F|^2"]), lo2, "lower"))
        records.append(_record("choi tr|F|^4", np.array(columns["choi tr|F|^4"]), hi4, "upper"))
        if regime in (Regime.TYPE2_NEAR, Regime.TYPE2_MID):
            md = params["m_diam"]
            lo2d = 1.0 / md if regime == Regime.TYPE2_NEAR else 1.0 / r
            hi4d = 64.0 / md**3 if regime == Regime.TYPE2_NEAR else 64.0 / r**3
            records.append(_record("diam tr|F|^2", np.array(columns["diam tr|F|^2"]), lo2d, "lower"))
            records.append(_record("diam tr|F|^4", np.array(columns["diam tr|F|^4"]), hi4d, "upper"))

    return MomentReport(
        regime=regime, d1=d1, d2=d2, r=r, eps=eps, n_pairs=int(pairs), records=tuple(records)
    )


# ---------------------------------------------------------------------------
# Packing nets
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PackingNet:
    """A sampled family of channels with its pairwise distance matrix."""

    regime: Regime
    d1: int
    d2: int
    r: int
    eps: float
    metric: str
    instances: tuple
    channels: tuple
    distances: np.ndarray
    min_pairwise: float
    seed: int | None = None

    @property
    def separation_ratio(self) -> float:
        return self.min_pairwise / self.eps if self.eps > 0 else math.inf

    def to_json(self) -> str:
        payload = {
            "regime": self.regime.value,
            "dims": [self.d1, self.d2, self.r],
            "eps": self.eps,
            "metric": self.metric,
            "seed": self.seed,
            "min_pairwise": self.min_pairwise,
            "channels": [json.loads(channel_to_json(ch)) for ch in self.channels],
        }
        return json.dumps(payload)


def _greedy_maximin(dist: np.ndarray, count: int) -> list:
    """Farthest-point subset: start from the widest pair, grow by max-min gap."""
    start = np.unravel_index(int(np.argmax(dist)), dist.shape)
    chosen = [int(start[0]), int(start[1])]
    gaps = np.minimum(dist[chosen[0]], dist[chosen[1]])
    gaps[chosen] = -1.0
    while len(chosen) < count:
        nxt = int(np.argmax(gaps))
        chosen.append(nxt)
        gaps = np.minimum(gaps, dist[nxt])
        gaps[nxt] = -1.0
    return chosen


def sample_packing_net(
    regime: Regime | str,
    d1: int,
    d2: int,
    r: int,
    eps: float,
    *,
    count: int = 16,
    metric: str = "choi",
    rng: np.random.Generator | None = None,
    seed: int | None = None,
) -> PackingNet:
    """Sample a packing of `count` well-separated perturbed channels.

    Draws an oversampled candidate cloud around the shared center and keeps
    a greedy maximin (farthest point) subset, the numerical stand-in for a
    maximal separated family. Selection always uses the cheap Choi metric;
    the reported pairwise distances use the requested one. metric "choi"
    records the normalized Choi trace norm; "diamond_lower" the see-saw
    lower bound on the diamond distance (never below the Choi value, since
    the see-saw starts from the maximally entangled input).
    """
    regime = Regime(regime)
    count = int(count)
    _require(2 <= count <= 64, f"count must lie in [2, 64], got {count}")
    _require(metric in ("choi", "diamond_lower"), f"unknown metric {metric!r}")
    if rng is None:
        rng = np.random.default_rng(0 if seed is None else seed)
    pool = 8 * count
    candidates = tuple(build_instance(regime, d1, d2, r, eps, rng) for _ in range(pool))
    cand_channels = tuple(inst.channel() for inst in candidates)
    base = np.zeros((pool, pool))
    for i, j in combinations(range(pool), 2):
        base[i, j] = base[j, i] = choi_trace_distance(cand_channels[i], cand_channels[j])
    keep = _greedy_maximin(base, count)
    instances = tuple(candidates[k] for k in keep)
    channels = tuple(cand_channels[k] for k in keep)
    if metric == "choi":
        dist = base[np.ix_(keep, keep)].copy()
    else:
        dist = np.zeros((count, count))
        for i, j in combinations(range(count), 2):
            val = diamond_distance(channels[i], channels[j], restarts=2, rng=rng).lower
            dist[i, j] = dist[j, i] = val
    min_pairwise = float(min(dist[i, j] for i, j in combinations(range(count), 2)))
    return PackingNet(
        regime=regime,
        d1=d1,
        d2=d2,
        r=r,
        eps=eps,
        metric=metric,
        instances=instances,
        channels=channels,
        distances=dist,
        min_pairwise=min_pairwise,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Lipschitz probes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LipschitzRecord:
    name: str
    constant: float
    max_ratio: float
    ok: bool


@dataclass(frozen=True)
class LipschitzReport:
    regime: Regime
    d1: int
    d2: int
    r: int
    eps: float
    trials: int
    records: tuple

    @property
    def all_ok(self) -> bool:
        return all(rec.ok for rec in self.records)


def _unitary_step(u: np.ndarray, scale: float, rng: np.random.Generator) -> np.ndarray:
    """Move u a Frobenius distance of order `scale` along the unitary group."""
    dim = u.shape[0]
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = (g + g.conj().T) / 2.0
    h *= scale / max(np.linalg.norm(h), 1e-30)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(1j * w)) @ v.conj().T @ u


def lipschitz_probe(
    regime: Regime | str,
    d1: int,
    d2: int,
    r: int,
    eps: float,
    *,
    trials: int = 200,
    rng: np.random.Generator | None = None,
    step: float = 1e-3,
) -> LipschitzReport:
    """Finite-difference check of the stated Lipschitz constants.

    Each trial evaluates the separation statistic at a random pair of
    unitaries and at a perturbed pair (alternating small geodesic steps and
    independent redraws), and records |delta f| over the Frobenius distance
    of the pair.  The ratio must stay below the stated constant.
    """
    regime = Regime(regime)
    rng = np.random.default_rng(0) if rng is None else rng
    params = _regime_params(regime, d1, d2, r)
    eps = _check_eps(eps)
    hd = params["haar_dim"]

    def make(u: np.ndarray) -> HardInstance:
        return _assemble(regime, d1, d2, r, eps, u)

    probes: list = []
    if regime == Regime.TYPE1:

        def f_choi(ux: np.ndarray, uy: np.ndarray) -> float:
            x, y = make(ux), make(uy)
            cx = _tr_anc_outer(x.matrix, x.matrix, d2, r)
            cy = _tr_anc_outer(y.matrix, y.matrix, d2, r)
            return trace_norm(cx - cy) / d1

        probes.append(("choi distance", eps * math.sqrt(32.0 / d1), f_choi))
    else:

        def f_choi(ux: np.ndarray, uy: np.ndarray) -> float:
            return trace_norm(choi_cross_statistic(make(ux), make(uy)))

        probes.append(("choi cross term", math.sqrt(2.0 / d1), f_choi))
        if regime in (Regime.TYPE2_NEAR, Regime.TYPE2_MID):
            md = params["m_diam"]

            def f_diam(ux: np.ndarray, uy: np.ndarray) -> float:
                return trace_norm(diamond_cross_statistic(make(ux), make(uy)))

            probes.append(("diamond cross term", math.sqrt(2.0 / md), f_diam))

    maxima = [0.0 for _ in probes]
    for trial in range(int(trials)):
        ux, uy = haar_unitary(hd, rng), haar_unitary(hd, rng)
        if trial % 2 == 0:
            scale = step * rng.uniform(0.2, 1.0)
            ux2 = _unitary_step(ux, scale, rng)
            uy2 = _unitary_step(uy, scale, rng)
        else:
            ux2, uy2 = haar_unitary(hd, rng), haar_unitary(hd, rng)
        denom = math.sqrt(
            np.linalg.norm(ux - ux2) ** 2 + np.linalg.norm(uy - uy2) ** 2
        )
        for idx, (_, _, fn) in enumerate(probes):
            if denom < 1e-12:
                continue
            ratio = abs(fn(ux2, uy2) - fn(ux, uy)) / denom
            maxima[idx] = max(maxima[idx], ratio)

    records = tuple(
        LipschitzRecord(
            name=name,
            constant=const,
            max_ratio=maxima[idx],
            ok=maxima[idx] <= const * (1.0 + 1e-3),
        )
        for idx, (name, const, _) in enumerate(probes)
    )
    return LipschitzReport(
        regime=regime, d1=d1, d2=d2, r=r, eps=eps, trials=int(trials), records=records
    )


# ---------------------------------------------------------------------------
# Gamma vector families and their comb certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GammaFamily:
    """Building blocks g0 = vec(center), g1 = vec(eps * direction).

    Vectors live on an output factor of dimension big_d (most significant)
    and an input factor of dimension d.  The two family kinds differ in the
    direction: an anti-Hermitian diagonal inside the embedded square block
    ("type1") or a shift into fresh output rows ("type2").  Both satisfy
    tr_out(g0 g0^dag) + tr_out(g1 g1^dag) = I exactly.
    """

    kind: str
    d: int
    big_d: int
    eps: float
    g0: np.ndarray
    g1: np.ndarray


def type1_gamma_family(d: int, big_d: int, eps: float) -> GammaFamily:
    d, big_d = int(d), int(big_d)
    _require(d >= 2, "type1 family needs d >= 2")
    _require(big_d >= d, "type1 family needs big_d >= d")
    eps = float(eps)
    _require(0.0 <= eps <= 1.0, f"eps must lie in [0, 1], got {eps}")
    dp = 2 * (d // 2)
    half = d // 2
    v0 = np.zeros((big_d, d), dtype=complex)
    for i in range(d):
        v0[i, i] = math.sqrt(1.0 - eps * eps) if i < dp else 1.0
    delta = np.zeros((big_d, d), dtype=complex)
    for i in range(dp):
        delta[i, i] = 1j if i < half else -1j
    return GammaFamily(
        kind="type1", d=d, big_d=big_d, eps=eps, g0=v0.reshape(-1), g1=eps * delta.reshape(-1)
    )


def type2_gamma_family(d: int, big_d: int, eps: float) -> GammaFamily:
    d, big_d = int(d), int(big_d)
    _require(d >= 1, "type2 family needs d >= 1")
    _require(big_d > d, "type2 family needs big_d > d")
    eps = float(eps)
    _require(0.0 <= eps <= 1.0, f"eps must lie in [0, 1], got {eps}")
    dp = min(d, big_d - d)
    v0 = np.zeros((big_d, d), dtype=complex)
    for i in range(d):
        v0[i, i] = math.sqrt(1.0 - eps * eps) if i < dp else 1.0
    delta = np.zeros((big_d, d), dtype=complex)
    for i in range(dp):
        delta[d + i, i] = 1.0
    return GammaFamily(
        kind="type2", d=d, big_d=big_d, eps=eps, g0=v0.reshape(-1), g1=eps * delta.reshape(-1)
    )


def _gamma_layout(family: GammaFamily, n: int) -> FactorLayout:
    factors = []
    for j in range(n):
        factors.append((("B", j), family.big_d))
        factors.append((("A", j), family.d))
    return FactorLayout(factors)


def _gamma_budget(family: GammaFamily, n: int) -> None:
    _require(1 <= n <= 3, f"n must lie in [1, 3], got {n}")
    _require(
        (family.big_d * family.d) ** n <= 2**15,
        f"gamma operator dimension {(family.big_d * family.d) ** n} exceeds the budget",
    )


def _gamma_product(family: GammaFamily, subset: frozenset, n: int) -> np.ndarray:
    vec = np.ones(1, dtype=complex)
    for j in range(n):
        vec = np.kron(vec, family.g1 if j in subset else family.g0)
    return vec


def _gamma_weight_vector(family: GammaFamily, weight: int, n: int) -> np.ndarray:
    _require(0 <= weight <= n, f"weight must lie in [0, {n}], got {weight}")
    total = np.zeros((family.big_d * family.d) ** n, dtype=complex)
    for subset in combinations(range(n), weight):
        total += _gamma_product(family, frozenset(subset), n)
    return total / math.sqrt(math.comb(n, weight))


def gamma_vector(family: GammaFamily, index, n: int) -> LabelledOperator:
    """|gamma><gamma| over n (output, input) factor pairs.

    For a type1 family `index` is the subset of perturbed slots; for a
    type2 family it is the total perturbation weight (the vector is the
    normalized sum over subsets of that size).
    """
    _gamma_budget(family, n)
    if family.kind == "type1":
        subset = frozenset(int(i) for i in index)
        _require(subset <= set(range(n)), f"subset {sorted(subset)} outside range({n})")
        vec = _gamma_product(family, subset, n)
    else:
        vec = _gamma_weight_vector(family, int(index), n)
    return LabelledOperator(np.outer(vec, vec.conj()), _gamma_layout(family, n))


def _certify_type1(
    op: LabelledOperator, family: GammaFamily, n: int, index, tol: float
) -> CombCheck:
    subset = None if index is None else frozenset(int(i) for i in index)

    def reference(level: int) -> np.ndarray:
        dim = (family.big_d * family.d) ** level
        if subset is None:
            total = np.zeros((dim, dim), dtype=complex)
            for size in range(level + 1):
                for chosen in combinations(range(level), size):
                    v = _gamma_product(family, frozenset(chosen), level)
                    total += np.outer(v, v.conj())
            return total
        v = _gamma_product(family, subset & set(range(level)), level)
        return np.outer(v, v.conj())

    worst = 0.0
    current = op
    for level in range(n, 0, -1):
        traced = current.partial_trace([("B", level - 1)])
        rhs = np.kron(reference(level - 1), np.eye(family.d))
        gap = min_eig(rhs - traced.op)
        if gap < -tol:
            return CombCheck(False, level, float(-gap))
        worst = max(worst, max(0.0, -gap))
        if level > 1:
            current = LabelledOperator(reference(level - 1), _gamma_layout(family, level - 1))
    return CombCheck(True, None, worst)


def _certify_type2(
    op: LabelledOperator, family: GammaFamily, n: int, weight: int, tol: float
) -> CombCheck:
    worst = 0.0

    def rhs_for(level: int, w: int) -> np.ndarray:
        dim = (family.big_d * family.d) ** (level - 1)
        total = np.zeros((dim * family.d, dim * family.d), dtype=complex)
        c_stay = math.comb(level - 1, w) / math.comb(level, w) if w <= level - 1 else 0.0
        if c_stay > 0:
            prev = _gamma_weight_vector(family, w, level - 1)
            total += c_stay * np.kron(np.outer(prev, prev.conj()), np.eye(family.d))
        if w >= 1:
            c_drop = math.comb(level - 1, w - 1) / math.comb(level, w)
            prev = _gamma_weight_vector(family, w - 1, level - 1)
            total += c_drop * np.kron(np.outer(prev, prev.conj()), np.eye(family.d))
        return total

    def check(level: int, w: int, matrix: np.ndarray, seen: set) -> CombCheck | None:
        nonlocal worst
        if (level, w) in seen:
            return None
        seen.add((level, w))
        layout = _gamma_layout(family, level)
        traced = LabelledOperator(matrix, layout).partial_trace([("B", level - 1)])
        if level == 1:
            gap = min_eig(np.eye(family.d) - traced.op)
        else:
            gap = min_eig(rhs_for(level, w) - traced.op)
        if gap < -tol:
            return CombCheck(False, level, float(-gap))
        worst = max(worst, max(0.0, -gap))
        if level > 1:
            for w_next in ([w, w - 1] if w >= 1 else [w]):
                if w_next > level - 1:
                    continue
                v = _gamma_weight_vector(family, w_next, level - 1)
                result = check(level - 1, w_next, np.outer(v, v.conj()), seen)
                if result is not None:
                    return result
        return None

    failure = check(n, weight, op.op, set())
    if failure is not None:
        return failure
    return CombCheck(True, None, worst)


def certify_gamma_comb(
    op: LabelledOperator, family: GammaFamily, n: int, index=None, tol: float = COMB_ATOL
) -> CombCheck:
    """Run the recursive partial-trace certificate on a gamma operator.

    Checks positivity, then walks the teeth from the last to the first,
    verifying at each level that tracing the output factor is dominated by
    the appropriate lower-level family operator tensored with identity
    (for type2 families, the binomially weighted mixture of the two
    adjacent weights).  `index` selects the branch: a subset for type1
    (None certifies against the full family sum), the weight for type2.
    """
    _gamma_budget(family, n)
    expected = _gamma_layout(family, n)
    _require(
        set(op.layout.labels) == set(expected.labels),
        "operator labels do not match the gamma factor layout",
    )
    op = op.aligned_to(expected)
    gap = min_eig(op.op)
    if gap < -tol:
        return CombCheck(False, -1, float(-gap))
    if family.kind == "type1":
        return _certify_type1(op, family, n, index, tol)
    _require(index is not None, "type2 certification needs the weight index")
    return _certify_type2(op, family, n, int(index), tol)
