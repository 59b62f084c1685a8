"""End-to-end acceptance criteria.

Each test prints one ``[acceptance N] PASS|FAIL`` line with the measured
quantities before asserting, so ``pytest -v`` output doubles as a report.
Expensive runs are shared through module-scoped fixtures; criterion 6
re-uses the converged runs of the other criteria.
"""

import time

import numpy as np
import pytest

from conftest import random_qp, scalar_qp
from ladmpsap import PenaltySchedule, SolverConfig, Status, solve
from ladmpsap.core import ergodic_average, fejer_diagnostic, optimality_measure, rate_alpha
from ladmpsap.linops import DenseMatrix, Identity, LeftMultiply, Mask, Negated, RightMultiply, Stacked, inner
from ladmpsap.oracle import eq_qp_solve, long_run_reference, prox_grid_oracle
from ladmpsap.problems import (
    GroupLogisticSpec,
    LatentLrrSpec,
    NmcSpec,
    build_group_logistic,
    build_latent_lrr,
    build_nmc,
    build_parallel_bp,
    fa_metric,
    gen_group_logistic_data,
    gen_latent_lrr_data,
    gen_nmc_data,
    overlapping_groups,
)
from ladmpsap.proxlib import (
    GroupL2,
    Indicator,
    L1Norm,
    LogisticLoss,
    NonnegativeCone,
    NuclearNorm,
    ShiftedSquare,
    SquaredFrobenius,
)

pytestmark = pytest.mark.acceptance

SEED = 0


def report(capsys, number, ok, text):
    with capsys.disabled():
        print(f"\n[acceptance {number}] {'PASS' if ok else 'FAIL'} {text}")


# -- shared runs ------------------------------------------------------------


@pytest.fixture(scope="module")
def divergence_runs():
    prob = build_parallel_bp(n=5, m=40, d=20, seed=SEED)
    t0 = time.perf_counter()
    naive = solve(prob, SolverConfig(variant="naive", eps1=1e-3, max_iter=2000, record_diagnostics=True))
    par = solve(prob, SolverConfig(variant="ladmpsap", eps1=1e-3, max_iter=2000, record_iterates=True))
    elapsed = time.perf_counter() - t0
    return prob, naive, par, elapsed


@pytest.fixture(scope="module")
def latlrr_runs():
    spec = LatentLrrSpec(s=5, p=20, d=50, r_tilde=5, mu=0.01, seed=SEED)
    X = gen_latent_lrr_data(spec)
    prob = build_latent_lrr(X, spec.mu)
    eps2 = 1e-4
    beta0 = np.linalg.norm(X, 2) * min(X.shape) * eps2
    base = SolverConfig(
        eps1=1e-3,
        schedule=PenaltySchedule(beta0=beta0, rho0=10.0, eps2=eps2),
        stopping_residual="plain",
        max_iter=5000,
        record_iterates=True,
    )
    t0 = time.perf_counter()
    adaptive = solve(prob, base.with_(variant="ladmpsap"))
    fixed = solve(prob, base.with_(variant="ladmps"))
    elapsed = time.perf_counter() - t0
    return prob, base, adaptive, fixed, elapsed


@pytest.fixture(scope="module")
def qp_runs():
    cfg = SolverConfig(
        eps1=1e-10, stop_eps2=1e-10, schedule=PenaltySchedule(beta_max=10.0), max_iter=20000, record_iterates=True
    )
    runs = []
    for k in range(20):
        prob = random_qp(1000 + k, n=(2, 3, 5)[k % 3])
        runs.append((prob, eq_qp_solve(prob), solve(prob, cfg)))
    return runs


# -- criteria ----------------------------------------------------------------


def test_1_divergence_contrast(divergence_runs, capsys):
    _, naive, par, elapsed = divergence_runs
    naive_reached = min(naive.trace.feasibility) < 1e-3
    ok = (not naive_reached) and par.status is Status.CONVERGED and par.iterations <= 2000 and elapsed < 30
    report(
        capsys, 1, ok,
        f"naive: {naive.status.value} after {naive.iterations} it, min feasibility "
        f"{min(naive.trace.feasibility):.3e}; ladmpsap: {par.status.value} after {par.iterations} it; "
        f"{elapsed:.1f}s",
    )
    assert not naive_reached, "the Gauss-Seidel baseline reached the feasibility tolerance"
    assert par.status is Status.CONVERGED and par.iterations <= 2000
    assert elapsed < 30


def test_2_adaptive_penalty_speedup(latlrr_runs, capsys):
    _, _, adaptive, fixed, elapsed = latlrr_runs
    ok = adaptive.converged and fixed.converged and adaptive.iterations < fixed.iterations and elapsed < 60
    report(
        capsys, 2, ok,
        f"ladmpsap {adaptive.iterations} it ({adaptive.status.value}), ladmps {fixed.iterations} it "
        f"({fixed.status.value}); {elapsed:.1f}s",
    )
    assert adaptive.converged and fixed.converged
    assert adaptive.iterations < fixed.iterations
    assert elapsed < 60


def test_3_nmc_nonnegativity(capsys):
    spec = NmcSpec(m=200, n=200, r=10, q=0.2, seed=SEED)
    X0, b, omega = gen_nmc_data(spec)
    prob = build_nmc(b, omega, (spec.m, spec.n), spec.mu)
    t0 = time.perf_counter()
    rep = solve(prob, SolverConfig(variant="practical", eps1=1e-5, schedule=PenaltySchedule(eps2=1e-5), max_iter=5000))
    elapsed = time.perf_counter() - t0
    fa = fa_metric(rep.x[0], X0)
    rel = np.linalg.norm(rep.x[0] - X0) / np.linalg.norm(X0)
    ok = rep.converged and rep.iterations <= 5000 and fa == 0.0 and rel <= 1e-3 and elapsed < 120
    report(
        capsys, 3, ok,
        f"{rep.status.value} after {rep.iterations} it; FA {fa:.3g}; relative error {rel:.3e}; {elapsed:.1f}s",
    )
    assert rep.converged and rep.iterations <= 5000
    assert fa == 0.0
    assert rel <= 1e-3
    assert elapsed < 120


def test_4_oracle_equivalence(qp_runs, capsys):
    errors = [max(float(np.abs(a - b).max()) for a, b in zip(rep.x, ref.x_star)) for _, ref, rep in qp_runs]
    ok = max(errors) <= 1e-5
    report(capsys, 4, ok, f"20 quadratic problems, worst max-norm error {max(errors):.3e}")
    assert ok


def test_5_ergodic_rate(capsys):
    Ks = np.array([10, 50, 100, 500])
    rng = np.random.default_rng(SEED)
    worst_slope, violations = -np.inf, 0
    for _ in range(5):
        c1, c2, b = rng.uniform(-2, 2, 3)
        prob = scalar_qp(c1, c2, b)
        ref = eq_qp_solve(prob)
        cfg = SolverConfig(
            variant="ladmps",
            schedule=PenaltySchedule(beta0=0.1),
            eps1=1e-300,
            stop_eps2=1e-300,
            max_iter=int(Ks.max()),
            record_iterates=True,
        )
        rep = solve(prob, cfg)
        alpha = rate_alpha(rep.norms, rep.etas)
        meas = np.array(
            [optimality_measure(ergodic_average(rep.trace.iterates[:K], rep.trace.beta[:K]), ref, prob, alpha)
             for K in Ks]
        )
        C = float(np.max(meas * (Ks + 1)))
        violations += int(np.sum(meas > C / (Ks + 1) * (1 + 1e-12)))
        slope = np.polyfit(np.log(Ks + 1), np.log(meas), 1)[0]
        worst_slope = max(worst_slope, slope)
    ok = violations == 0 and worst_slope <= -0.9
    report(capsys, 5, ok, f"5 scalar QPs, fixed beta; worst log-log slope {worst_slope:.3f}; bound violations {violations}")
    assert violations == 0
    assert worst_slope <= -0.9


def test_6_fejer_monotone(divergence_runs, latlrr_runs, qp_runs, capsys):
    """Runs of the base algorithm with eta_i > n ||A_i||^2 that converged.

    The practical and proximal runs are excluded: their monotone quantities
    involve different constants.
    """
    checked, worst = 0, -np.inf

    def check(states, betas, reference, etas):
        nonlocal checked, worst
        vals = np.array(fejer_diagnostic(states, betas, reference, etas))
        worst = max(worst, float(np.max(np.diff(vals) / max(1.0, vals[0]))))
        checked += 1

    prob, _, par, _ = divergence_runs
    if par.converged:
        ref = long_run_reference(prob, max_iter=20000)
        check(par.trace.states, par.trace.beta_history, ref, par.etas)

    prob, base, adaptive, fixed, _ = latlrr_runs
    ref = long_run_reference(prob, base, max_iter=5000)
    for rep in (adaptive, fixed):
        if rep.converged:
            check(rep.trace.states, rep.trace.beta_history, ref, rep.etas)

    for _, ref, rep in qp_runs:
        if rep.converged:
            check(rep.trace.states, rep.trace.beta_history, ref, rep.etas)

    ok = checked > 0 and worst <= 1e-10
    report(capsys, 6, ok, f"{checked} converged runs; largest relative increase {worst:.3e}")
    assert checked > 0
    assert worst <= 1e-10


def test_7_prox_oracle_suite(capsys):
    rng = np.random.default_rng(SEED)
    step = 1e-4
    count, worst = {}, {}

    def compare(name, got, expected, tol=step):
        err = float(np.max(np.abs(got - expected)))
        worst[name] = max(worst.get(name, 0.0), err)
        count[name] = count.get(name, 0) + 1
        return err <= tol

    agree = True
    for _ in range(100):
        sigma = rng.uniform(0.2, 5.0)
        w = 2 * rng.standard_normal(4)
        term = L1Norm(rng.uniform(0.1, 2.0))
        agree &= compare("l1", term.prox(w, sigma), prox_grid_oracle(term, sigma, w, step))
        term = SquaredFrobenius(rng.uniform(0.1, 2.0))
        agree &= compare("sq_frobenius", term.prox(w, sigma), prox_grid_oracle(term, sigma, w, step))
        term = GroupL2([1, 3], rng.uniform(0.1, 2.0))
        agree &= compare("group_l2", term.prox(w, sigma), prox_grid_oracle(term, sigma, w, step))
        term = Indicator(NonnegativeCone())
        agree &= compare("nonneg", term.prox(w, sigma), prox_grid_oracle(term, sigma, w, step))
        term = ShiftedSquare(rng.standard_normal(4), rng.uniform(0.2, 3.0))
        agree &= compare("shifted_square", term.prox(w, sigma), prox_grid_oracle(term, sigma, w, step))
        W = rng.standard_normal((2, 3))
        term = NuclearNorm(rng.uniform(0.1, 1.5))
        agree &= compare("nuclear", term.prox(W, sigma), prox_grid_oracle(term, sigma, W, step))

    X = rng.standard_normal((4, 6))
    maps = [
        DenseMatrix(rng.standard_normal((5, 3)), cols=2),
        Identity((3, 2), scale=-0.5),
        Mask(([0, 2, 1], [1, 0, 2]), (3, 3)),
        LeftMultiply(X, cols=6),
        RightMultiply(X, rows=4),
        Negated(DenseMatrix(rng.standard_normal((2, 2)))),
        Stacked([(DenseMatrix(rng.standard_normal((2, 3))), 0), (Identity((3, 1)), 2)], total=6),
    ]
    adj_worst = 0.0
    for A in maps:
        for _ in range(20):
            x, y = rng.standard_normal(A.input_shape), rng.standard_normal(A.output_shape)
            lhs, rhs = inner(A.apply(x), y), inner(x, A.adjoint(y))
            adj_worst = max(adj_worst, abs(lhs - rhs) / max(abs(lhs), 1e-300))

    Xbar = rng.standard_normal((8, 30))
    loss = LogisticLoss(Xbar, np.where(np.arange(30) % 2 == 0, 1.0, -1.0))
    grad_worst = 0.0
    for _ in range(10):
        wv = rng.standard_normal((8, 1))
        fd = np.zeros_like(wv)
        for i in range(8):
            e = np.zeros_like(wv)
            e[i] = 1e-6
            fd[i] = (loss.value(wv + e) - loss.value(wv - e)) / 2e-6
        grad_worst = max(grad_worst, float(np.linalg.norm(loss.gradient(wv) - fd) / np.linalg.norm(fd)))

    ok = agree and min(count.values()) >= 100 and adj_worst <= 1e-10 and grad_worst <= 1e-5
    summary = ", ".join(f"{k} {worst[k]:.1e}" for k in sorted(worst))
    report(
        capsys, 7, ok,
        f"prox vs grid over {min(count.values())} instances each (worst: {summary}); "
        f"adjoint {adj_worst:.1e}; logistic gradient {grad_worst:.1e}",
    )
    assert agree and min(count.values()) >= 100
    assert adj_worst <= 1e-10
    assert grad_worst <= 1e-5


def test_8_support_recovery(capsys):
    spec = GroupLogisticSpec(t=10, s=60, q=3, mu=0.1, seed=SEED)
    X, y, support = gen_group_logistic_data(spec)
    prob = build_group_logistic(X, y, overlapping_groups(spec.t), spec.mu)
    t0 = time.perf_counter()
    rep = solve(prob, SolverConfig(variant="proximal", eps1=2e-4, schedule=PenaltySchedule(eps2=2e-3), max_iter=10000))
    elapsed = time.perf_counter() - t0
    found = np.flatnonzero(np.abs(rep.x[0][:-1, 0]) > 1e-3)
    recovered = np.array_equal(found, support)
    ok = rep.converged and recovered and elapsed < 60
    report(
        capsys, 8, ok,
        f"{rep.status.value} after {rep.iterations} it; recovered {found.size} coordinates, true support "
        f"{support.size}, missed {np.setdiff1d(support, found).size}, extra {np.setdiff1d(found, support).size}; "
        f"{elapsed:.1f}s",
    )
    assert rep.converged
    assert recovered
    assert elapsed < 60


def test_9_variant_collapse(capsys):
    identical = 0
    for k in range(10):
        prob = build_parallel_bp(n=3 + k % 3, m=8, d=5, seed=100 + k)
        a = solve(prob, SolverConfig(variant="ladmpsap", max_iter=300, record_iterates=True))
        b = solve(
            prob,
            SolverConfig(variant="proximal", prox_constants=[0.0] * prob.n, update_residual="step",
                         max_iter=300, record_iterates=True),
        )
        same = (
            a.iterations == b.iterations
            and a.trace.beta_history == b.trace.beta_history
            and all(
                all(np.array_equal(u, v) for u, v in zip(sa[0], sb[0])) and np.array_equal(sa[1], sb[1])
                for sa, sb in zip(a.trace.states, b.trace.states)
            )
        )
        identical += int(same)
    ok = identical == 10
    report(capsys, 9, ok, f"{identical}/10 instances bit-identical")
    assert ok
