"""End-to-end acceptance checks for the clustered D2D caching model.

Each test covers one acceptance criterion, records a single PASS/FAIL line
(echoed in the pytest terminal summary), and then asserts. The expensive
analytic coverage grid and the Monte Carlo grid are computed once per module
and shared across criteria.
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate, stats

from d2dcache.analytic import (
    QuadratureSpec,
    compute_Z,
    coverage_content,
    laplace_exact,
    laplace_ppp_bound,
    offloading_closed_form_k1,
)
from d2dcache.experiments import policy_entropy
from d2dcache.model import (
    ContentLibrary,
    NetworkConfig,
    policy_cpf,
    policy_zipf_proportional,
    validate_policy,
    zipf_popularity,
)
from d2dcache.optimizer import grid_search_oracle, solve_p1
from d2dcache.simulator import (
    _run_coverage,
    default_sim_radius,
    estimate_coverage,
    estimate_offloading,
)

REF = NetworkConfig(lambda_p=40e-6, n_bar=8.0, sigma=50.0, alpha=4.0, theta=1.0)
LIB = ContentLibrary.from_zipf(100, 0.5, 5)
QUAD = QuadratureSpec()

# Independent oracle (mpmath, 30 digits): 1.6 * pi**2 + 1 for the reference
# network, i.e. 4 sigma^2 pi n_bar lambda_p theta^(1/2) Gamma(3/2) Gamma(1/2) + 1.
Z_ORACLE = 16.791367041742974

SIGMAS = (10.0, 25.0, 50.0, 100.0)
LAMBDAS = (10e-6, 20e-6, 40e-6)

# Six-point Monte Carlo grid: the sigma sweep at 40 clusters/km^2 plus the
# remaining density points at sigma 50 m. Every point also sits in the
# analytic grid above so exact values are shared.
SIM_POINTS = (
    (10.0, 40e-6),
    (25.0, 40e-6),
    (50.0, 40e-6),
    (100.0, 40e-6),
    (50.0, 10e-6),
    (50.0, 20e-6),
)
SIM_TRIALS = 50_000
SIM_SEED = 20260822


def record(report, num, name, ok, detail=""):
    line = f"ACCEPTANCE {num} {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    report.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module")
def coverage_grid():
    """Exact and bound coverage at full caching for all 12 configurations."""
    grid = {}
    for sig in SIGMAS:
        for lam in LAMBDAS:
            cfg = REF.with_(sigma=sig, lambda_p=lam)
            exact = coverage_content(1.0, cfg, QUAD, method="exact-tcp").value
            bound = coverage_content(1.0, cfg, QUAD, method="ppp-bound").value
            grid[(sig, lam)] = (exact, bound)
    return grid


@pytest.fixture(scope="module")
def sim_grid():
    """Monte Carlo coverage on the six-point grid, with wall time."""
    start = time.perf_counter()
    out = {}
    for sig, lam in SIM_POINTS:
        cfg = REF.with_(sigma=sig, lambda_p=lam)
        out[(sig, lam)] = estimate_coverage(
            1.0, cfg, trials=SIM_TRIALS, seed=SIM_SEED
        )
    return out, time.perf_counter() - start


def test_criterion_1_closed_form_identity(acceptance_report):
    start = time.perf_counter()
    z = compute_Z(REF)
    policy = policy_zipf_proportional(LIB)
    c = np.asarray(policy.probs)
    q = LIB.popularity

    # Single-caterer success probability by quadrature: average the bound
    # Laplace transform over the Rayleigh(sqrt(2) sigma) link distance.
    two_s2 = 2.0 * REF.sigma**2

    def integrand(u):
        pdf = (u / two_s2) * math.exp(-(u * u) / (2.0 * two_s2))
        return float(laplace_ppp_bound(REF.theta * u**REF.alpha, REF)) * pdf

    one_caterer, _ = integrate.quad(integrand, 0.0, np.inf)

    weight = c * REF.n_bar * np.exp(-c * REF.n_bar)
    per_file_quad = q * (c + (1.0 - c) * weight * one_caterer)
    per_file_closed = q * (c + (1.0 - c) * weight / z)
    gap = float(np.max(np.abs(per_file_closed - per_file_quad)))

    total_closed = offloading_closed_form_k1(policy, LIB, REF)
    decomposition_err = abs(float(np.sum(per_file_closed)) - total_closed)
    z_rel_err = abs(z - Z_ORACLE) / Z_ORACLE
    elapsed = time.perf_counter() - start

    ok = (
        gap < 1e-6
        and decomposition_err <= 1e-12
        and z_rel_err <= 1e-8
        and elapsed < 1.0
    )
    record(
        acceptance_report, 1, "closed-form-identity", ok,
        f"max per-file gap {gap:.2e}, Z rel err {z_rel_err:.2e}, "
        f"{elapsed:.2f} s",
    )
    assert gap < 1e-6
    assert decomposition_err <= 1e-12
    assert z_rel_err <= 1e-8
    assert elapsed < 1.0


def test_criterion_2_bound_ordering(acceptance_report, coverage_grid):
    t_gamma = np.logspace(-3.0, 3.0, 30) * REF.theta
    exact = np.array([float(laplace_exact(t, REF, QUAD)) for t in t_gamma])
    bound = np.array([float(laplace_ppp_bound(t, REF)) for t in t_gamma])
    laplace_ok = bool(np.all(bound <= exact))

    coverage_ok = all(b <= e for e, b in coverage_grid.values())
    gaps = {
        key: (e - b) / e for key, (e, b) in coverage_grid.items()
    }
    tight = gaps[(10.0, 10e-6)]
    loose = gaps[(100.0, 40e-6)]
    tightness_ok = tight < loose

    ok = laplace_ok and coverage_ok and tightness_ok
    record(
        acceptance_report, 2, "bound-ordering", ok,
        f"rel gap {tight:.4f} at (10 m, 10/km^2) vs {loose:.4f} at "
        f"(100 m, 40/km^2)",
    )
    assert laplace_ok, "bound exceeded exact transform on the t*gamma grid"
    assert coverage_ok, "bound exceeded exact coverage on the config grid"
    assert tightness_ok, f"gap ordering violated: {tight} >= {loose}"


def test_criterion_3_sim_vs_analytic(acceptance_report, coverage_grid,
                                     sim_grid):
    estimates, elapsed = sim_grid
    worst = 0.0
    agree = True
    for key, est in estimates.items():
        exact = coverage_grid[key][0]
        err = abs(est.mean - exact)
        tol = max(0.02, est.half_width_95)
        worst = max(worst, err)
        if err > tol or est.trials < 50_000:
            agree = False

    ok = agree and elapsed <= 600.0
    record(
        acceptance_report, 3, "sim-vs-analytic", ok,
        f"6 points, worst |sim - exact| {worst:.4f}, {elapsed:.0f} s",
    )
    assert agree, f"simulation disagreed with exact coverage (worst {worst})"
    assert elapsed <= 600.0


def test_criterion_4_monotonicity(acceptance_report, coverage_grid, sim_grid):
    estimates, _ = sim_grid

    sigma_sweep = [(s, 40e-6) for s in SIGMAS]
    lambda_sweep = [(50.0, lam) for lam in LAMBDAS]

    def analytic_strict(keys):
        vals = [coverage_grid[k][0] for k in keys]
        return all(a > b for a, b in zip(vals, vals[1:]))

    def sim_separated(keys):
        ests = [estimates[k] for k in keys]
        return all(
            a.mean - a.half_width_95 > b.mean + b.half_width_95
            for a, b in zip(ests, ests[1:])
        )

    analytic_ok = analytic_strict(sigma_sweep) and analytic_strict(lambda_sweep)
    sim_ok = sim_separated(sigma_sweep) and sim_separated(lambda_sweep)

    ok = analytic_ok and sim_ok
    record(
        acceptance_report, 4, "coverage-monotonicity", ok,
        "decreasing in sigma and in cluster density, sim beyond CI overlap",
    )
    assert analytic_ok, "exact coverage not strictly monotone along a sweep"
    assert sim_ok, "simulated coverage not separated beyond CI overlap"


def test_criterion_5_optimizer_vs_oracle(acceptance_report):
    rng = np.random.default_rng(20260822)
    start = time.perf_counter()
    worst_gap = -np.inf
    worst_sum = 0.0
    worst_stat = 0.0
    violations = []
    for _ in range(20):
        beta = float(rng.uniform(0.0, 2.0))
        lib = ContentLibrary.from_zipf(5, beta, 2)
        sol = solve_p1(lib, REF)
        _, oracle_val = grid_search_oracle(lib, REF, 0.02)
        worst_gap = max(worst_gap, oracle_val - sol.objective)
        worst_sum = max(
            worst_sum, abs(float(np.sum(sol.policy.probs)) - 2.0)
        )
        residuals = sol.diagnostics["stationarity_residuals"]
        if residuals:
            worst_stat = max(worst_stat, max(residuals))
        violations.extend(validate_policy(sol.policy, lib))
    elapsed = time.perf_counter() - start

    ok = (
        worst_gap <= 1e-3
        and worst_sum <= 1e-8
        and worst_stat <= 1e-8
        and not violations
        and elapsed < 60.0
    )
    record(
        acceptance_report, 5, "optimizer-vs-oracle", ok,
        f"20 instances, worst oracle gap {worst_gap:.2e}, worst stationarity "
        f"{worst_stat:.2e}, {elapsed:.1f} s",
    )
    assert worst_gap <= 1e-3, f"oracle beat the solver by {worst_gap}"
    assert worst_sum <= 1e-8
    assert worst_stat <= 1e-8
    assert not violations, violations
    assert elapsed < 60.0


def test_criterion_6_baseline_dominance(acceptance_report):
    betas = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5]
    dominance_ok = True
    eq_gap = None
    improvements = []
    for beta in betas:
        lib = ContentLibrary.from_zipf(100, beta, 5)
        opt_val = solve_p1(lib, REF).objective
        zipf_val = offloading_closed_form_k1(
            policy_zipf_proportional(lib), lib, REF
        )
        cpf_val = offloading_closed_form_k1(policy_cpf(lib), lib, REF)
        if opt_val < zipf_val - 1e-12 or opt_val < cpf_val - 1e-12:
            dominance_ok = False
        if beta == 0.0:
            eq_gap = abs(opt_val - zipf_val)
        improvements.append((opt_val - zipf_val) / zipf_val)

    best = max(improvements)
    best_beta = betas[int(np.argmax(improvements))]
    equality_ok = eq_gap is not None and eq_gap <= 1e-9
    detail = (
        f"max improvement over proportional baseline {100 * best:.1f}% at "
        f"beta {best_beta:g}"
    )
    if best < 0.05:
        detail += "; FLAG: below the 5% benefit mark, needs investigation"

    ok = dominance_ok and equality_ok
    record(acceptance_report, 6, "baseline-dominance", ok, detail)
    assert dominance_ok, "optimized policy fell below a baseline"
    assert equality_ok, f"uniform-popularity equality gap {eq_gap}"


def test_criterion_7_entropy_tradeoff(acceptance_report):
    tight_cfg = REF.with_(sigma=10.0, lambda_p=20e-6)
    sparse_cfg = REF.with_(sigma=100.0, lambda_p=50e-6)
    h_tight = policy_entropy(solve_p1(LIB, tight_cfg).policy)
    h_sparse = policy_entropy(solve_p1(LIB, sparse_cfg).policy)

    ok = h_tight > h_sparse
    record(
        acceptance_report, 7, "entropy-tradeoff", ok,
        f"{h_tight:.3f} nats (10 m, 20/km^2) > {h_sparse:.3f} nats "
        f"(100 m, 50/km^2)",
    )
    assert ok, f"entropy ordering violated: {h_tight} <= {h_sparse}"


def test_criterion_8_property_suite(acceptance_report):
    checks = {}

    # Popularity normalization across library shapes.
    checks["zipf-normalization"] = all(
        abs(float(np.sum(zipf_popularity(n, beta))) - 1.0) <= 1e-12
        for n, beta in [(10, 0.0), (100, 0.5), (1000, 1.2), (50, 2.0)]
    )

    # Exact repeatability of both estimators under a fixed seed.
    cov_a = estimate_coverage(0.7, REF, trials=2500, seed=77)
    cov_b = estimate_coverage(0.7, REF, trials=2500, seed=77)
    policy = policy_zipf_proportional(LIB)
    off_a = estimate_offloading(policy, LIB, REF, trials=2000, seed=77)
    off_b = estimate_offloading(policy, LIB, REF, trials=2000, seed=77)
    checks["determinism"] = (
        cov_a.mean == cov_b.mean
        and cov_a.half_width_95 == cov_b.half_width_95
        and off_a.mean == off_b.mean
        and off_a.half_width_95 == off_b.half_width_95
    )

    # The fading-power scale must cancel out of every SIR comparison, and
    # the analytic objective never depends on it.
    gamma_ok = True
    for gamma_d in (0.1, 10.0):
        cfg_g = REF.with_(gamma_d=gamma_d)
        if estimate_coverage(0.7, cfg_g, trials=2500, seed=77).mean != cov_a.mean:
            gamma_ok = False
        if estimate_offloading(policy, LIB, cfg_g, trials=2000,
                               seed=77).mean != off_a.mean:
            gamma_ok = False
        if offloading_closed_form_k1(policy, LIB, cfg_g) != \
                offloading_closed_form_k1(policy, LIB, REF):
            gamma_ok = False
    checks["gamma-d-invariance"] = gamma_ok

    # Caterer counts must follow a thinned Poisson law: chi-square GOF
    # against Poisson(c * n_bar) at the 1% level. The window radius only
    # affects interference, not the caterer draw, so a small one is fine.
    c_m = 0.5
    trials = 100_000
    _, k_all = _run_coverage(np.full(trials, c_m), REF, 50.0, seed=29)
    mean_k = c_m * REF.n_bar
    k_hi = int(stats.poisson.isf(1e-4, mean_k))
    observed = np.bincount(np.minimum(k_all, k_hi), minlength=k_hi + 1)
    expected = stats.poisson.pmf(np.arange(k_hi + 1), mean_k) * trials
    expected[k_hi] = stats.poisson.sf(k_hi - 1, mean_k) * trials
    stat = float(np.sum((observed - expected) ** 2 / expected))
    p_value = float(stats.chi2.sf(stat, k_hi))
    checks["poisson-caterers"] = p_value > 0.01

    # Enlarging the interference window must not move the estimate by more
    # than the combined confidence half-widths.
    r0 = default_sim_radius(REF)
    est_r = estimate_coverage(1.0, REF, trials=20_000, seed=5, r_sim=r0)
    est_2r = estimate_coverage(1.0, REF, trials=20_000, seed=5, r_sim=2 * r0)
    window_shift = abs(est_r.mean - est_2r.mean)
    checks["window-stability"] = (
        window_shift <= est_r.half_width_95 + est_2r.half_width_95
    )

    failed = [name for name, good in checks.items() if not good]
    ok = not failed
    detail = (
        f"{len(checks)} properties, GOF p {p_value:.3f}, window shift "
        f"{window_shift:.4f}"
    )
    if failed:
        detail += "; failed: " + ", ".join(failed)
    record(acceptance_report, 8, "property-suite", ok, detail)
    assert ok, f"failed properties: {failed}"
