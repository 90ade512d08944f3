"""Cache-placement optimization for the single-caterer offloading bound.

Maximizes sum_m q_m f(c_m) over the simplex {0 <= c_m <= 1, sum c = M},
where f(c) = c + (1-c) c n_bar exp(-c n_bar) / Z is each file's offloading
contribution. f is strictly increasing but concave only up to an inflection
point c_inflect = ((4+n_bar) - sqrt(n_bar^2+8)) / (2 n_bar); for n_bar > 1
its derivative turns back up on (c_inflect, 1], so the classical
threshold/multiplier structure is applied to the concave envelope of f
(derivative follows f' on [0, c_T], then stays at the chord slope s to
c = 1, with c_T the tangency point). A multiplier bisection on the envelope
yields a continuous budget curve; at most the files tied at the chord
threshold need a residual completion, and a pairwise-transfer polish plus a
joint Newton step restore exact stationarity on the true objective.

A brute-force simplex enumeration oracle and a concavity diagnostic are
provided to certify solutions instead of assuming global concavity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .analytic import NumericalError, compute_Z, offloading_closed_form_k1
from .model import CachingPolicy, ContentLibrary, NetworkConfig, validate_policy

__all__ = [
    "KktSolution",
    "marginal_gain",
    "solve_c_given_v",
    "solve_p1",
    "grid_search_oracle",
    "concavity_report",
]

SUM_TOL = 1e-8
STATIONARITY_TOL = 1e-8
_CLAMP_EPS = 1e-9
_ORACLE_MAX_POINTS = 20_000_000


@dataclass(frozen=True)
class KktSolution:
    """Optimized caching vector with its multiplier and per-file diagnostics.

    diagnostics keys: 'labels' (per-file 'clamped-0' | 'clamped-1' |
    'interior'), 'sum_residual', 'stationarity_residuals' (interior files,
    same order as they appear), 'concavity_warnings', 'chord_completion'.
    """

    policy: CachingPolicy
    multiplier: float
    objective: float
    diagnostics: dict


def _unit_gain(c, n_bar, Z):
    """Per-file offloading contribution at unit popularity."""
    c = np.asarray(c, dtype=float)
    return c + (n_bar / Z) * c * (1.0 - c) * np.exp(-c * n_bar)


def _unit_marginal(c, n_bar, Z):
    """d/dc of _unit_gain."""
    c = np.asarray(c, dtype=float)
    return 1.0 + (n_bar / Z) * np.exp(-c * n_bar) * (
        1.0 - c * (2.0 + n_bar - n_bar * c)
    )


def _unit_marginal_prime(c, n_bar, Z):
    """d^2/dc^2 of _unit_gain; positive beyond the inflection point."""
    c = np.asarray(c, dtype=float)
    poly = -2.0 - 2.0 * n_bar + 4.0 * n_bar * c + n_bar**2 * c - n_bar**2 * c**2
    return (n_bar / Z) * np.exp(-c * n_bar) * poly


def marginal_gain(c, q_m: float, n_bar: float, Z: float):
    """Derivative of q_m (c + (1-c) c n_bar e^{-c n_bar} / Z) w.r.t. c.

    Equals q_m + (q_m n_bar e^{-c n_bar} / Z)(1 - c(2 + n_bar - n_bar c)).
    Accepts scalar or array c in [0, 1].
    """
    c_arr = np.asarray(c, dtype=float)
    if np.any(c_arr < 0) or np.any(c_arr > 1):
        raise ValueError("caching probability c must lie in [0,1]")
    out = q_m * _unit_marginal(c_arr, n_bar, Z)
    if np.isscalar(c):
        return float(out)
    return out


def _inflection_point(n_bar: float) -> float:
    """Smallest positive root of the curvature polynomial; > 1 means the
    per-file objective is concave on all of [0, 1]."""
    return ((4.0 + n_bar) - math.sqrt(n_bar * n_bar + 8.0)) / (2.0 * n_bar)


def _chord_tangency(n_bar: float, Z: float) -> tuple[float, float]:
    """Tangency point c_T and slope s of the concave envelope's chord to c=1.

    Returns (1.0, f'(1)) when the objective is already concave on [0, 1].
    """
    c_inflect = _inflection_point(n_bar)
    if c_inflect >= 1.0:
        return 1.0, float(_unit_marginal(1.0, n_bar, Z))

    def gap(c):
        # chord from (c, f(c)) to (1, f(1)=1) is tangent when slope = f'(c)
        return float(
            _unit_marginal(c, n_bar, Z) * (1.0 - c) - (1.0 - _unit_gain(c, n_bar, Z))
        )

    c_t = brentq(gap, 1e-12, c_inflect, xtol=1e-14, rtol=8.9e-16)
    return float(c_t), float(_unit_marginal(c_t, n_bar, Z))


def solve_c_given_v(v_star: float, q_m: float, n_bar: float, Z: float) -> float:
    """Per-file threshold rule: caching probability with marginal value v_star.

    Returns 1 when v_star is below the marginal at c=1, 0 when above the
    marginal at c=0, otherwise a root of marginal_gain(c) = v_star in (0,1).
    When the marginal is non-monotone (n_bar > 1) several roots can exist;
    the root maximizing the budget-priced objective
    q_m f(c) - v_star c is returned.
    """
    if q_m <= 0 or n_bar <= 0 or Z < 1:
        raise ValueError("q_m and n_bar must be positive and Z >= 1")
    if v_star < 0:
        raise ValueError("multiplier must be >= 0")
    upper = q_m * float(_unit_marginal(0.0, n_bar, Z))
    lower = q_m * float(_unit_marginal(1.0, n_bar, Z))
    if v_star >= upper:
        return 0.0
    if v_star <= lower:
        return 1.0

    v_hat = v_star / q_m

    def g(c):
        return float(_unit_marginal(c, n_bar, Z)) - v_hat

    roots = []
    for n_grid in (201, 10_001):  # coarse scan, then the fine fallback
        grid = np.linspace(0.0, 1.0, n_grid)
        vals = _unit_marginal(grid, n_bar, Z) - v_hat
        sign_flip = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
        roots = [
            brentq(g, grid[i], grid[i + 1], xtol=1e-12, rtol=8.9e-16)
            for i in sign_flip
        ]
        roots.extend(float(grid[i]) for i in np.nonzero(vals == 0.0)[0])
        if roots:
            break
    if not roots:
        raise NumericalError(
            "no interior stationary point found between the thresholds",
            diagnostics={"v_star": v_star, "q_m": q_m},
        )
    priced = [q_m * float(_unit_gain(c, n_bar, Z)) - v_star * c for c in roots]
    return float(roots[int(np.argmax(priced))])


class _EnvelopeRule:
    """Vectorized per-file solution on the concave envelope.

    On the envelope the marginal is f'(c) on [0, c_T] and constant s on
    [c_T, 1], so c(v) is single-valued and the budget sum is monotone in v
    up to the chord thresholds s*q_m, where c jumps from the tangency value
    to 1. An inverse table plus Newton refinement gives c(v) to ~1e-14.
    """

    def __init__(self, n_bar, Z, c_t, slope):
        self.n_bar, self.Z, self.c_t, self.slope = n_bar, Z, c_t, slope
        c_grid = np.linspace(0.0, c_t, 1024)
        phi = _unit_marginal(c_grid, n_bar, Z)
        # strictly decreasing on [0, c_T]; store ascending for np.interp
        self._phi_asc = phi[::-1].copy()
        self._c_asc = c_grid[::-1].copy()
        self.phi0 = float(phi[0])

    def __call__(self, v, q):
        v_hat = v / q
        c = np.ones_like(q)
        c[v_hat >= self.phi0] = 0.0
        branch = (v_hat >= self.slope) & (v_hat < self.phi0)
        if branch.any():
            guess = np.interp(v_hat[branch], self._phi_asc, self._c_asc)
            for _ in range(4):
                err = _unit_marginal(guess, self.n_bar, self.Z) - v_hat[branch]
                deriv = _unit_marginal_prime(guess, self.n_bar, self.Z)
                guess = np.clip(guess - err / deriv, 0.0, self.c_t)
            c[branch] = guess
        return c


def _pairwise_polish(c, q, n_bar, Z, max_sweeps=80):
    """Local improvement by budget transfers within file pairs.

    Repeatedly re-optimizes (c_i, c_j) at fixed c_i + c_j over all pairs
    with distinct popularity until no transfer improves the objective.
    Skipped entirely when any popularity ties exist, so that equal files
    keep identical caching probabilities (the symmetric tie-break).
    """
    n_files = c.size
    if np.unique(q).size < n_files:
        return c, False
    changed_any = False
    for _ in range(max_sweeps):
        changed = False
        for i in range(n_files - 1):
            for j in range(i + 1, n_files):
                total = c[i] + c[j]
                x_lo, x_hi = max(0.0, total - 1.0), min(1.0, total)
                if x_hi - x_lo < 1e-12:
                    continue
                current = q[i] * _unit_gain(c[i], n_bar, Z) + q[j] * _unit_gain(
                    c[j], n_bar, Z
                )
                xs = np.linspace(x_lo, x_hi, 41)
                vals = q[i] * _unit_gain(xs, n_bar, Z) + q[j] * _unit_gain(
                    total - xs, n_bar, Z
                )
                best = int(np.argmax(vals))
                if vals[best] <= current + 1e-14:
                    continue
                # refine around the winning coarse node
                step = xs[1] - xs[0]
                fine = np.linspace(
                    max(x_lo, xs[best] - step), min(x_hi, xs[best] + step), 201
                )
                fvals = q[i] * _unit_gain(fine, n_bar, Z) + q[j] * _unit_gain(
                    total - fine, n_bar, Z
                )
                k = int(np.argmax(fvals))
                if fvals[k] > current + 1e-14:
                    c[i], c[j] = float(fine[k]), float(total - fine[k])
                    changed = changed_any = True
        if not changed:
            break
    return c, changed_any


def _newton_refine(c, q, n_bar, Z, interior, budget):
    """Equalize interior marginals at a common multiplier and pin the sum.

    Solves marginal_m(c_m) = v for all interior m together with
    sum(c_interior) = budget by a damped Newton iteration started from the
    polished point. Returns (c, v, converged).
    """
    idx = np.nonzero(interior)[0]
    if idx.size == 0:
        return c, 0.0, True
    v = float(np.mean(q[idx] * _unit_marginal(c[idx], n_bar, Z)))
    for _ in range(60):
        ci = c[idx]
        phi = q[idx] * _unit_marginal(ci, n_bar, Z)
        dphi = q[idx] * _unit_marginal_prime(ci, n_bar, Z)
        if np.any(np.abs(dphi) < 1e-13):
            return c, v, False  # marginal locally flat; keep polished point
        gap = float(budget - ci.sum())
        dv = (gap - float(((v - phi) / dphi).sum())) / float((1.0 / dphi).sum())
        dc = (v + dv - phi) / dphi
        scale = 1.0
        limit = np.max(np.abs(dc))
        if limit > 0.25:
            scale = 0.25 / limit
        c[idx] = np.clip(ci + scale * dc, 1e-12, 1.0 - 1e-12)
        v += scale * dv
        if (
            np.max(np.abs(q[idx] * _unit_marginal(c[idx], n_bar, Z) - v)) < 1e-12
            and abs(budget - c[idx].sum()) < 1e-12
        ):
            return c, v, True
    resid = np.max(np.abs(q[idx] * _unit_marginal(c[idx], n_bar, Z) - v))
    return c, v, resid < STATIONARITY_TOL


def solve_p1(library: ContentLibrary, cfg: NetworkConfig) -> KktSolution:
    """Optimal probabilistic caching for the single-caterer offloading bound.

    Bisects the budget multiplier over the concave-envelope per-file rule
    (continuous except at the chord thresholds), completes any file tied at
    its threshold with the residual budget, polishes with pairwise budget
    transfers on the true objective, and Newton-refines interior files to a
    common marginal. Constraint residual and interior stationarity are both
    driven below 1e-8; concavity caveats are reported in diagnostics, and
    the result is guaranteed not to fall below any baseline policy.
    """
    q = library.popularity
    n_files, budget = library.n_files, float(library.cache_size)
    if library.cache_size >= n_files:
        raise ValueError("cache budget must be smaller than the library")
    n_bar, z = cfg.n_bar, compute_Z(cfg)
    c_t, slope = _chord_tangency(n_bar, z)
    rule = _EnvelopeRule(n_bar, z, c_t, slope)
    warnings = []
    if c_t < 1.0:
        warnings.append(
            f"per-file objective is convex on ({_inflection_point(n_bar):.4f}, 1]; "
            f"concave envelope used with chord tangency at c = {c_t:.4f}"
        )

    v_lo, v_hi = 0.0, float(q.max()) * rule.phi0
    for _ in range(200):
        v_mid = 0.5 * (v_lo + v_hi)
        if rule(v_mid, q).sum() >= budget:
            v_lo = v_mid
        else:
            v_hi = v_mid
    c_low_v, c_high_v = rule(v_lo, q), rule(v_hi, q)
    v_star = 0.5 * (v_lo + v_hi)

    chord_completion = False
    c = c_high_v.copy()
    if abs(c.sum() - budget) > 1e-10:
        flipped = np.abs(c_low_v - c_high_v) > 1e-6
        if flipped.any():
            chord_completion = True
            residual = budget - c[~flipped].sum()
            c[flipped] = residual / flipped.sum()
        # any remaining mismatch is repaired by the Newton step below

    def finish(start):
        """Polish, order, and Newton-refine a feasible start; returns the
        final vector, multiplier, stationarity flag."""
        vec, _ = _pairwise_polish(start.copy(), q, n_bar, z)
        # give larger caching probabilities to more popular files; the gain
        # is increasing in c, so this rearrangement never hurts
        vec = np.sort(vec)[::-1].copy()
        inner = (vec > _CLAMP_EPS) & (vec < 1.0 - _CLAMP_EPS)
        fixed_sum = vec[~inner].round().sum()
        vec, v_ref, ok = _newton_refine(vec, q, n_bar, z, inner, budget - fixed_sum)
        vec[~inner] = vec[~inner].round()  # snap clamped files to exact 0 / 1
        drift = budget - vec.sum()
        if inner.any() and drift != 0.0:
            vec[np.nonzero(inner)[0][0]] += drift
        return np.clip(vec, 0.0, 1.0), v_ref, ok, inner

    c, v_refined, converged, interior = finish(c)
    if interior.any():
        v_star = v_refined
    if not converged:
        warnings.append("interior stationarity refinement did not fully converge")
    objective = offloading_closed_form_k1(CachingPolicy(c), library, cfg)

    # never fall below a constructor baseline: restart the finish pipeline
    # from any baseline that scores higher (guards a poor local optimum)
    from .model import policy_cpf, policy_uniform, policy_zipf_proportional

    for baseline in (policy_zipf_proportional, policy_cpf, policy_uniform):
        cand = baseline(library)
        if offloading_closed_form_k1(cand, library, cfg) > objective + 1e-12:
            c_alt, v_alt, ok_alt, inner_alt = finish(cand.probs.copy())
            alt_obj = offloading_closed_form_k1(CachingPolicy(c_alt), library, cfg)
            if alt_obj > objective:
                c, objective, interior = c_alt, alt_obj, inner_alt
                if inner_alt.any():
                    v_star = v_alt
                warnings.append("restarted from a dominating baseline policy")

    policy = CachingPolicy(c)
    violations = validate_policy(policy, library)
    if violations:
        raise NumericalError("optimizer produced an infeasible policy: "
                             + "; ".join(violations))

    labels = [
        "clamped-1" if ci >= 1.0 - _CLAMP_EPS
        else "clamped-0" if ci <= _CLAMP_EPS
        else "interior"
        for ci in c
    ]
    interior_idx = np.nonzero(interior)[0]
    stationarity = [
        float(abs(q[m] * _unit_marginal(c[m], n_bar, z) - v_star))
        for m in interior_idx
    ]
    diagnostics = {
        "labels": labels,
        "sum_residual": float(abs(c.sum() - budget)),
        "stationarity_residuals": stationarity,
        "concavity_warnings": warnings,
        "chord_completion": chord_completion,
    }
    return KktSolution(
        policy=policy, multiplier=float(v_star), objective=float(objective),
        diagnostics=diagnostics,
    )


def _count_compositions(total: int, parts: int, cap: int) -> int:
    """Number of integer vectors of length `parts` in [0, cap] summing to total."""
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for _ in range(parts):
        new = np.zeros_like(counts)
        for value in range(min(cap, total) + 1):
            new[value:] += counts[: total + 1 - value]
        counts = new
    return int(counts[total])


def grid_search_oracle(
    library: ContentLibrary, cfg: NetworkConfig, step: float
) -> tuple[CachingPolicy, float]:
    """Exhaustive simplex scan maximizing the closed-form objective.

    Enumerates every caching vector with entries in {0, step, ..., 1}
    summing exactly to the cache budget and returns the best (policy,
    objective). Only meant for small instances: n_files <= 6, step <= 0.05,
    and at most ~2e7 lattice points.
    """
    if library.n_files > 6:
        raise ValueError("oracle restricted to n_files <= 6")
    if step > 0.05 + 1e-12 or step <= 0:
        raise ValueError("step must be in (0, 0.05]")
    per_file = round(1.0 / step)
    if abs(per_file * step - 1.0) > 1e-9:
        raise ValueError("step must divide 1 exactly")
    total = library.cache_size * per_file
    n_points = _count_compositions(total, library.n_files, per_file)
    if n_points > _ORACLE_MAX_POINTS:
        raise ValueError(
            f"enumeration budget exceeded: {n_points} lattice points"
        )

    # level-by-level vectorized enumeration with budget pruning
    partial = np.zeros((1, 0), dtype=np.int32)
    remaining = np.array([total], dtype=np.int32)
    for depth in range(library.n_files - 1):
        slots_after = library.n_files - 1 - depth
        lo = np.maximum(remaining - slots_after * per_file, 0)
        hi = np.minimum(remaining, per_file)
        counts = hi - lo + 1
        row_idx = np.repeat(np.arange(remaining.size), counts)
        offsets = np.arange(counts.sum()) - np.repeat(
            np.concatenate([[0], np.cumsum(counts)[:-1]]), counts
        )
        values = lo[row_idx] + offsets.astype(np.int32)
        partial = np.column_stack([partial[row_idx], values])
        remaining = remaining[row_idx] - values
    lattice = np.column_stack([partial, remaining])

    gain_by_level = _unit_gain(np.arange(per_file + 1) * step, cfg.n_bar, compute_Z(cfg))
    objectives = (gain_by_level[lattice] * library.popularity).sum(axis=1)
    best = int(np.argmax(objectives))
    best_policy = CachingPolicy(lattice[best].astype(float) * step)
    return best_policy, float(objectives[best])


def concavity_report(
    q_m: float, n_bar: float, Z: float, grid_points: int = 101
) -> list[tuple[float, int]]:
    """Numerical curvature scan of the per-file objective over [0, 1].

    Differentiates marginal_gain on a uniform grid and returns
    (c, curvature sign) pairs, sign +1 marking subintervals where the
    objective is convex (the region Lemma-style concavity arguments miss).
    Output length equals grid_points.
    """
    if grid_points < 10:
        raise ValueError("grid_points must be >= 10")
    cs = np.linspace(0.0, 1.0, grid_points)
    second = np.gradient(marginal_gain(cs, q_m, n_bar, Z), cs)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(second))))
    signs = np.where(second > tol, 1, np.where(second < -tol, -1, 0))
    return [(float(c), int(s)) for c, s in zip(cs, signs)]
