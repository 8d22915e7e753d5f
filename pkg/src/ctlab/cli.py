"""Command line front end: seeded invariant suites with machine-readable output.

Every subcommand takes a required --seed, runs a batch of deterministic
checks, and emits one report (JSON, or the checks table as CSV).  Exit code
0 means every check passed, 1 that at least one failed, 2 a usage error and
3 a declined run because the requested operator dimension exceeds the
budget.  Trial i uses the generator seeded by SeedSequence([seed, i]); set
CTL_THREADS to run independent trials on a thread pool.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import metadata

import click
import numpy as np

from .channels import Isometry, dilate, random_channel
from .combs import LabelledOperator, link_product, random_parallel_tester
from .hardness import (
    Regime,
    build_instance,
    certify_gamma_comb,
    gamma_vector,
    sample_packing_net,
    type2_gamma_family,
)
from .linalg import (
    FactorLayout,
    dft_matrix,
    haar_unitaries,
    haar_unitary,
    random_density,
    random_isometry,
    trace_norm,
)
from .localtest import verify_dilation_identity
from .metrics import (
    channel_fidelity,
    choi_trace_distance,
    diamond_distance,
    fidelity_trace_conversion,
    unitary_diamond_distance,
)
from .moments import fourth_moment_trace, mc_fourth_moment_trace, twirl1, twirl2
from .tomography import (
    PureStateOracleConfig,
    align_phases,
    channel_tomography,
    isometry_tomography,
    min_phase_op_error,
    weak_isometry_tomography,
)

DIM_BUDGET = 4096

_REGIME_NAMES = [r.value for r in Regime]


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _trial_rng(root_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([root_seed, index]))


def _thread_count() -> int:
    raw = os.environ.get("CTL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_trials(fn, count: int, root_seed: int) -> list:
    """Run fn(index, rng) for each trial, results in index order."""
    workers = _thread_count()
    if workers <= 1 or count <= 1:
        return [fn(i, _trial_rng(root_seed, i)) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, i, _trial_rng(root_seed, i)) for i in range(count)]
        return [f.result() for f in futures]


def _check(name: str, passed: bool, value: float, detail: str = "") -> dict:
    return {"name": name, "passed": bool(passed), "value": float(value), "detail": detail}


def _budget_guard(dim: int) -> None:
    if dim > DIM_BUDGET:
        click.echo(
            f"declined: operator dimension {dim} exceeds the budget of {DIM_BUDGET}", err=True
        )
        sys.exit(3)


def _emit(command: str, config: dict, checks: list, fmt: str, out: str, extra: dict | None = None):
    report = {
        "command": command,
        "version": _version(),
        "config": config,
        "checks": checks,
        "all_passed": all(c["passed"] for c in checks),
    }
    if extra:
        report.update(extra)
    if fmt == "json":
        text = json.dumps(report, indent=2)
    else:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["name", "passed", "value", "detail"])
        for c in checks:
            writer.writerow([c["name"], c["passed"], repr(c["value"]), c["detail"]])
        text = buf.getvalue()
    if out == "-":
        click.echo(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")
    sys.exit(0 if report["all_passed"] else 1)


def _common(fn):
    fn = click.option("--out", default="-", show_default=True, help="Output path, - for stdout.")(fn)
    fn = click.option(
        "--format",
        "fmt",
        type=click.Choice(["json", "csv"]),
        default="json",
        show_default=True,
        help="Report format (csv emits the checks table only).",
    )(fn)
    fn = click.option("--seed", type=int, required=True, help="Root seed for all randomness.")(fn)
    return fn


@click.group()
@click.version_option(version=_version(), prog_name="ctlab")
def main():
    """Numerical laboratory for channel estimation experiments."""


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


@main.command()
@_common
def verify(seed: int, fmt: str, out: str):
    """Fast cross-module invariant suite on small seeded examples."""
    checks = []

    rng = _trial_rng(seed, 0)
    ch = random_channel(3, 2, 2, rng)
    back = type(ch).from_kraus(ch.kraus)
    defect = float(np.max(np.abs(back.choi - ch.choi)))
    redil = dilate(ch, 3).contract()
    defect = max(defect, float(np.max(np.abs(redil.choi - ch.choi))))
    checks.append(_check("kraus and dilation round trips", defect < 1e-9, defect))

    rng = _trial_rng(seed, 1)
    ch = random_channel(2, 3, 2, rng)
    rho = random_density(2, rng)
    lc = LabelledOperator(
        ch.choi, FactorLayout(((("B", 0), ch.d_out), (("A", 0), ch.d_in)))
    )
    lrho = LabelledOperator(rho, FactorLayout(((("A", 0), ch.d_in),)))
    linked = link_product(lc, lrho)
    defect = float(np.max(np.abs(linked.op - ch.apply(rho))))
    checks.append(_check("link product applies the channel", defect < 1e-9, defect))

    rng = _trial_rng(seed, 2)
    m = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    t1 = twirl1(m, (3, 2), 0)
    target = np.kron(np.eye(3) / 3.0, np.trace(m.reshape(3, 2, 3, 2), axis1=0, axis2=2))
    defect = float(np.max(np.abs(t1 - target)))
    checks.append(_check("single-factor twirl fixed point", defect < 1e-9, defect))

    dim = 3
    exact = fourth_moment_trace(np.eye(dim), np.eye(dim), np.eye(dim), np.eye(dim))
    defect = abs(exact - dim)
    checks.append(_check("fourth moment identity case", defect < 1e-12, defect))

    worst = 0.0
    for idx, (regime, dims) in enumerate(
        [
            (Regime.TYPE1, (4, 2, 2)),
            (Regime.TYPE2_NEAR, (5, 2, 3)),
            (Regime.TYPE2_MID, (4, 3, 2)),
            (Regime.TYPE2_LARGE, (2, 4, 3)),
        ]
    ):
        rng = _trial_rng(seed, 10 + idx)
        inst = build_instance(regime, dims[0], dims[1], dims[2], 0.1, rng)
        gram = inst.matrix.conj().T @ inst.matrix
        worst = max(worst, float(np.max(np.abs(gram - np.eye(dims[0])))))
    checks.append(_check("hard instances are exact isometries", worst < 1e-9, worst))

    family = type2_gamma_family(2, 3, 0.2)
    op = gamma_vector(family, 1, 2)
    cert = certify_gamma_comb(op, family, 2, index=1)
    scaled = certify_gamma_comb(op.scaled(1.5), family, 2, index=1)
    ok = bool(cert.ok) and not scaled.ok
    checks.append(_check("gamma comb certificate accepts and rejects", ok, cert.defect))

    rng = _trial_rng(seed, 20)
    target = Isometry(random_isometry(4, 2, rng))
    cfg = PureStateOracleConfig(eps_max=0.0)
    v1 = weak_isometry_tomography(target, cfg, rng)
    v2 = weak_isometry_tomography(Isometry(target.matrix @ dft_matrix(2)), cfg, rng)
    err = min_phase_op_error(target.matrix, align_phases(v1, v2, 2).matrix)
    checks.append(_check("noiseless tomography recovers the target", err < 1e-9, err))

    rng = _trial_rng(seed, 21)
    net = sample_packing_net(Regime.TYPE1, 4, 2, 2, 0.1, count=4, rng=rng)
    checks.append(
        _check("packing net separates", net.min_pairwise > 0.0, net.min_pairwise)
    )

    rng = _trial_rng(seed, 22)
    a = random_channel(2, 2, 2, rng)
    b = random_channel(2, 2, 2, rng)
    est = diamond_distance(a, b, restarts=2, rng=rng)
    choi = choi_trace_distance(a, b)
    ok = choi <= est.lower + 1e-9 and est.lower <= est.upper + 1e-9
    checks.append(_check("diamond estimate brackets the choi distance", ok, est.lower - choi))

    _emit("verify", {"seed": seed}, checks, fmt, out)


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------


@main.command()
@_common
@click.option("--d", type=int, default=3, show_default=True, help="Unitary dimension.")
@click.option("--samples", type=int, default=20_000, show_default=True, help="Monte Carlo samples.")
def moments(seed: int, fmt: str, out: str, d: int, samples: int):
    """Closed-form Haar moments against Monte Carlo, plus twirl fixed points."""
    if d < 1:
        raise click.UsageError("--d must be at least 1")
    if samples < 2:
        raise click.UsageError("--samples must be at least 2")
    _budget_guard(d * d)
    checks = []

    batch = haar_unitaries(d, samples, _trial_rng(seed, 0))

    def quadruple_trial(index: int, rng: np.random.Generator):
        ops = [
            rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)) for _ in range(4)
        ]
        exact = fourth_moment_trace(*ops)
        mc = mc_fourth_moment_trace(*ops, unitaries=batch)
        z_re = abs(mc.mean.real - exact.real) / max(mc.stderr_real, 1e-15)
        z_im = abs(mc.mean.imag - exact.imag) / max(mc.stderr_imag, 1e-15)
        return exact, mc, max(z_re, z_im)

    results = _map_trials(quadruple_trial, 3, seed)
    for i, (exact, mc, z) in enumerate(results):
        checks.append(
            _check(
                f"fourth moment quadruple {i}",
                z <= 5.0,
                z,
                f"exact {exact:.6g}, mc {mc.mean:.6g} ({mc.n_samples} samples)",
            )
        )

    rng = _trial_rng(seed, 100)
    m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    t1 = twirl1(m, (d,), 0)
    defect = float(np.max(np.abs(t1 - np.eye(d) * np.trace(m) / d)))
    checks.append(_check("first-order twirl fixed point", defect < 1e-9, defect))

    m2 = rng.standard_normal((d * d, d * d)) + 1j * rng.standard_normal((d * d, d * d))
    t2 = twirl2(m2, (d, d), (0, 1))
    t2_again = twirl2(t2, (d, d), (0, 1))
    defect = float(np.max(np.abs(t2_again - t2)))
    checks.append(_check("second-order twirl is idempotent", defect < 1e-9, defect))

    exact = fourth_moment_trace(np.eye(d), np.eye(d), np.eye(d), np.eye(d))
    defect = abs(exact - d)
    checks.append(_check("identity quadruple equals d", defect < 1e-12, defect))

    _emit("moments", {"seed": seed, "d": d, "samples": samples}, checks, fmt, out)


# ---------------------------------------------------------------------------
# localtest
# ---------------------------------------------------------------------------


@main.command()
@_common
@click.option("--n", type=int, default=1, show_default=True, help="Queries per tester (1 or 2).")
@click.option("--d1", type=int, default=2, show_default=True, help="Channel input dimension.")
@click.option("--d2", type=int, default=2, show_default=True, help="Channel output dimension.")
@click.option("--r", type=int, default=2, show_default=True, help="Ancilla dimension.")
@click.option("--samples", type=int, default=5_000, show_default=True, help="Monte Carlo samples.")
@click.option("--testers", type=int, default=3, show_default=True, help="Random testers drawn.")
@click.option("--channels", type=int, default=3, show_default=True, help="Random channels drawn.")
def localtest(
    seed: int, fmt: str, out: str, n: int, d1: int, d2: int, r: int, samples: int, testers: int, channels: int
):
    """Localized versus dilation-averaged tester statistics."""
    if n not in (1, 2):
        raise click.UsageError("--n must be 1 or 2")
    for label, value in (("--d1", d1), ("--d2", d2), ("--r", r)):
        if value < 1:
            raise click.UsageError(f"{label} must be at least 1")
    if r * d2 < d1:
        raise click.UsageError("--r times --d2 must be at least --d1 (dilation feasibility)")
    _budget_guard((d1 * d2 * r) ** n)

    tester_list = [
        random_parallel_tester(n, d1, d2, 2, _trial_rng(seed, 100_000 + i), anc_dim=r)
        for i in range(testers)
    ]
    min_rank = -(-d1 // d2)

    def pair_trial(index: int, rng: np.random.Generator):
        i, j = divmod(index, channels)
        rank = int(rng.integers(min_rank, min(r, d1 * d2) + 1))
        ch = random_channel(d1, d2, rank, rng)
        return i, j, verify_dilation_identity(tester_list[i], ch, samples=samples, rng=rng)

    results = _map_trials(pair_trial, testers * channels, seed)
    checks = [
        _check(
            f"tester {i} channel {j}",
            res.ok,
            res.max_fixed_dev,
            f"sigma dev {res.max_sigma_dev:.3f} over {res.n_samples} samples",
        )
        for i, j, res in results
    ]
    config = {
        "seed": seed,
        "n": n,
        "d1": d1,
        "d2": d2,
        "r": r,
        "samples": samples,
        "testers": testers,
        "channels": channels,
    }
    _emit("localtest", config, checks, fmt, out)


# ---------------------------------------------------------------------------
# packing-net
# ---------------------------------------------------------------------------


@main.command(name="packing-net")
@_common
@click.option(
    "--regime",
    type=click.Choice(_REGIME_NAMES),
    default=Regime.TYPE1.value,
    show_default=True,
    help="Hard instance family.",
)
@click.option("--d1", type=int, default=4, show_default=True, help="Input dimension.")
@click.option("--d2", type=int, default=2, show_default=True, help="Output dimension.")
@click.option("--r", type=int, default=2, show_default=True, help="Ancilla dimension.")
@click.option("--eps", type=float, default=0.05, show_default=True, help="Perturbation strength.")
@click.option("--count", type=int, default=16, show_default=True, help="Net size (2..64).")
@click.option(
    "--metric",
    type=click.Choice(["choi", "diamond_lower"]),
    default="choi",
    show_default=True,
    help="Pairwise distance recorded.",
)
def packing_net(
    seed: int, fmt: str, out: str, regime: str, d1: int, d2: int, r: int, eps: float, count: int, metric: str
):
    """Sample a packing net of perturbed channels and record its spread."""
    _budget_guard(d1 * d2 * max(r, 1))
    try:
        net = sample_packing_net(
            Regime(regime), d1, d2, r, eps, count=count, metric=metric, seed=seed
        )
    except ValueError as exc:
        raise click.UsageError(str(exc))

    checks = [
        _check("pairwise distances positive", net.min_pairwise > 0.0, net.min_pairwise),
        _check(
            "separation scales with eps",
            net.separation_ratio > 0.0,
            net.separation_ratio,
            "min pairwise distance over eps",
        ),
    ]
    worst = 0.0
    for inst in net.instances:
        gram = inst.matrix.conj().T @ inst.matrix
        worst = max(worst, float(np.max(np.abs(gram - np.eye(d1)))))
    checks.append(_check("members are exact isometries", worst < 1e-9, worst))

    config = {
        "seed": seed,
        "regime": regime,
        "d1": d1,
        "d2": d2,
        "r": r,
        "eps": eps,
        "count": count,
        "metric": metric,
    }
    _emit("packing-net", config, checks, fmt, out, extra={"net": json.loads(net.to_json())})


# ---------------------------------------------------------------------------
# tomography
# ---------------------------------------------------------------------------


@main.command(name="tomography")
@_common
@click.option("--d1", type=int, default=2, show_default=True, help="Input dimension.")
@click.option("--d2", type=int, default=3, show_default=True, help="Output dimension.")
@click.option("--eps", type=float, default=0.1, show_default=True, help="Target accuracy, in (0, 1].")
@click.option("--trials", type=int, default=20, show_default=True, help="Independent runs.")
@click.option(
    "--r",
    type=int,
    default=0,
    show_default=True,
    help="Ancilla budget; 0 estimates a random isometry, >0 a random channel.",
)
def tomography_cmd(seed: int, fmt: str, out: str, d1: int, d2: int, eps: float, trials: int, r: int):
    """Repeated estimation runs with success-rate and query accounting."""
    if not 0.0 < eps <= 1.0:
        raise click.UsageError("--eps must lie in (0, 1]")
    if trials < 1:
        raise click.UsageError("--trials must be at least 1")
    if r == 0 and d2 < d1:
        raise click.UsageError("isometry estimation needs --d2 >= --d1")
    if r < 0:
        raise click.UsageError("--r must be nonnegative")
    if r > 0 and r * d2 < d1:
        raise click.UsageError("--r times --d2 must be at least --d1 (dilation feasibility)")
    _budget_guard(d1 * d2 * max(r, 1))

    d_col = d2 if r == 0 else r * d2
    expected_queries = 2 * d1 * math.ceil(64.0 * d_col / (eps * eps))
    min_rank = -(-d1 // d2)

    def trial(index: int, rng: np.random.Generator):
        if r == 0:
            target = Isometry(random_isometry(d2, d1, rng))
            return isometry_tomography(target, eps, rng, diamond_restarts=2)
        rank = int(rng.integers(min_rank, min(r, d1 * d2) + 1))
        ch = random_channel(d1, d2, rank, rng)
        return channel_tomography(ch, r, eps, rng, diamond_restarts=2)

    reports = _map_trials(trial, trials, seed)
    successes = sum(1 for rep in reports if rep.success)
    rate = successes / trials
    errors = [rep.op_error if r == 0 else rep.choi_error for rep in reports]
    queries_ok = all(rep.queries_charged == expected_queries for rep in reports)

    checks = [
        _check("success rate at least 2/3", rate >= 2.0 / 3.0, rate, f"{successes}/{trials}"),
        _check(
            "query accounting matches the formula",
            queries_ok,
            float(reports[0].queries_charged),
            f"expected {expected_queries} per run",
        ),
        _check(
            "mean error within target",
            float(np.mean(errors)) <= eps,
            float(np.mean(errors)),
            "operator-norm error" if r == 0 else "choi trace distance",
        ),
    ]
    config = {"seed": seed, "d1": d1, "d2": d2, "eps": eps, "trials": trials, "r": r}
    _emit("tomography", config, checks, fmt, out)


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------


@main.command()
@_common
@click.option("--d1", type=int, default=2, show_default=True, help="Input dimension.")
@click.option("--d2", type=int, default=2, show_default=True, help="Output dimension.")
@click.option("--pairs", type=int, default=10, show_default=True, help="Random channel pairs.")
def distances(seed: int, fmt: str, out: str, d1: int, d2: int, pairs: int):
    """Choi, fidelity and diamond distance consistency on random pairs."""
    if pairs < 1:
        raise click.UsageError("--pairs must be at least 1")
    _budget_guard(max(d1 * d1, d1 * d2))
    min_rank = -(-d1 // d2)

    def pair_trial(index: int, rng: np.random.Generator):
        a = random_channel(d1, d2, int(rng.integers(min_rank, d1 * d2 + 1)), rng)
        b = random_channel(d1, d2, int(rng.integers(min_rank, d1 * d2 + 1)), rng)
        choi = choi_trace_distance(a, b)
        est = diamond_distance(a, b, restarts=2, rng=rng)
        fid_bound = fidelity_trace_conversion(channel_fidelity(a, b))
        upper_dev = abs(est.upper - trace_norm(a.choi - b.choi))
        sandwich = choi <= est.lower + 1e-9 and est.lower <= est.upper + 1e-9
        fvg = choi <= fid_bound + 1e-9
        return sandwich, fvg, upper_dev

    results = _map_trials(pair_trial, pairs, seed)
    sandwich_fails = sum(1 for s, _, _ in results if not s)
    fvg_fails = sum(1 for _, f, _ in results if not f)
    worst_upper = max(dev for _, _, dev in results)

    checks = [
        _check("choi below diamond sandwich", sandwich_fails == 0, float(sandwich_fails), f"{pairs} pairs"),
        _check("fidelity conversion upper bound", fvg_fails == 0, float(fvg_fails), f"{pairs} pairs"),
        _check("upper estimate equals choi trace norm", worst_upper < 1e-9, worst_upper),
    ]

    def unitary_trial(index: int, rng: np.random.Generator):
        u = haar_unitary(d1, rng)
        v = haar_unitary(d1, rng)
        exact = unitary_diamond_distance(u, v)
        est = diamond_distance(
            Isometry(u).channel(), Isometry(v).channel(), restarts=16, rng=rng
        )
        return abs(est.lower - exact)

    devs = _map_trials(unitary_trial, 2, seed + 7919)
    checks.append(_check("see-saw matches analytic unitary distance", max(devs) <= 1e-4, max(devs)))

    config = {"seed": seed, "d1": d1, "d2": d2, "pairs": pairs}
    _emit("distances", config, checks, fmt, out)


if __name__ == "__main__":
    main()
