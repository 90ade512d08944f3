"""Domain types and cache-placement policies for a clustered D2D caching network.

Devices live in Gaussian clusters (a Thomas cluster process), share a common
content library with Zipf-distributed request popularity, and cache files
probabilistically: file m is cached independently at every device with
probability c_m, with the vector c filling the per-device cache budget M in
expectation (sum over m of c_m equals M).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NetworkConfig",
    "ContentLibrary",
    "CachingPolicy",
    "zipf_popularity",
    "validate_policy",
    "policy_cpf",
    "policy_zipf_proportional",
    "policy_uniform",
]

# Tolerances for the policy constraints (box and budget-sum).
POPULARITY_SUM_TOL = 1e-12
POLICY_SUM_TOL = 1e-8
POLICY_BOX_TOL = 1e-12

_THETA_RHO_REL_TOL = 1e-9


@dataclass(frozen=True)
class NetworkConfig:
    """Spatial and channel parameters of the clustered network.

    Attributes
    ----------
    lambda_p : float
        Density of cluster centers [clusters per m^2].
    n_bar : float
        Mean number of devices per cluster.
    sigma : float
        Standard deviation of the Gaussian member displacement around a
        cluster center, per axis [m].
    alpha : float
        Path-loss exponent; must exceed 2 for the interference integrals
        to converge.
    gamma_d : float
        D2D transmit power (arbitrary units; cancels in the SIR).
    theta : float
        SIR threshold, linear scale.
    rho : float
        Rate threshold [bits/sec/Hz]; theta = 2**rho - 1. Either theta or
        rho may be given at construction; the other is derived.
    """

    lambda_p: float
    n_bar: float
    sigma: float
    alpha: float
    gamma_d: float = 1.0
    theta: float | None = None
    rho: float | None = None

    def __post_init__(self):
        for name in ("lambda_p", "n_bar", "sigma", "gamma_d"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be strictly positive, got {value!r}")
        if not self.alpha > 2:
            raise ValueError(f"alpha must exceed 2, got {self.alpha!r}")

        theta, rho = self.theta, self.rho
        if theta is None and rho is None:
            raise ValueError("one of theta or rho must be given")
        if theta is None:
            theta = 2.0**rho - 1.0
        elif rho is None:
            rho = math.log2(1.0 + theta)
        else:
            expected = 2.0**rho - 1.0
            if abs(theta - expected) > _THETA_RHO_REL_TOL * max(1.0, abs(expected)):
                raise ValueError(
                    f"inconsistent thresholds: theta={theta!r} but 2**rho - 1 = {expected!r}"
                )
        if not theta > 0:
            raise ValueError(f"theta must be strictly positive, got {theta!r}")
        # frozen dataclass: bypass immutability once to store canonical values
        object.__setattr__(self, "theta", float(theta))
        object.__setattr__(self, "rho", float(rho))

    def with_(self, **changes) -> "NetworkConfig":
        """Copy with some fields replaced; theta/rho are re-derived coherently."""
        fields = {
            "lambda_p": self.lambda_p,
            "n_bar": self.n_bar,
            "sigma": self.sigma,
            "alpha": self.alpha,
            "gamma_d": self.gamma_d,
            "theta": self.theta,
            "rho": self.rho,
        }
        if "theta" in changes and "rho" not in changes:
            fields["rho"] = None
        if "rho" in changes and "theta" not in changes:
            fields["theta"] = None
        fields.update(changes)
        return NetworkConfig(**fields)


def zipf_popularity(n_files: int, beta: float) -> np.ndarray:
    """Zipf request probabilities q_m = m**(-beta) / sum_k k**(-beta).

    The returned vector is normalized and non-increasing in the file rank m.
    """
    if n_files < 1:
        raise ValueError(f"n_files must be >= 1, got {n_files!r}")
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta!r}")
    ranks = np.arange(1, n_files + 1, dtype=float)
    weights = ranks ** (-float(beta))
    q = weights / weights.sum()
    q.setflags(write=False)
    return q


@dataclass(frozen=True)
class ContentLibrary:
    """File catalog: size, Zipf skew, per-device cache budget, popularity vector."""

    n_files: int
    beta: float
    cache_size: int
    popularity: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.n_files < 1:
            raise ValueError(f"n_files must be >= 1, got {self.n_files!r}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta!r}")
        if not 1 <= self.cache_size < self.n_files:
            raise ValueError(
                f"cache_size must satisfy 1 <= M < n_files, got M={self.cache_size!r}, "
                f"n_files={self.n_files!r}"
            )
        q = self.popularity
        if q is None:
            q = zipf_popularity(self.n_files, self.beta)
        else:
            q = np.asarray(q, dtype=float).copy()
            if q.shape != (self.n_files,):
                raise ValueError(f"popularity must have shape ({self.n_files},)")
            if abs(q.sum() - 1.0) > POPULARITY_SUM_TOL:
                raise ValueError(f"popularity must sum to 1, got {q.sum()!r}")
            if np.any(np.diff(q) > 0):
                raise ValueError("popularity must be non-increasing in the file rank")
            q.setflags(write=False)
        object.__setattr__(self, "popularity", q)

    @classmethod
    def from_zipf(cls, n_files: int, beta: float, cache_size: int) -> "ContentLibrary":
        return cls(n_files=n_files, beta=beta, cache_size=cache_size)


@dataclass(frozen=True)
class CachingPolicy:
    """Per-file caching probabilities c_m. Constraints are checked by validate_policy."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float).copy()
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a non-empty 1-D vector")
        if not np.all(np.isfinite(probs)):
            raise ValueError("probs must be finite")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def __len__(self) -> int:
        return self.probs.size


def validate_policy(policy: CachingPolicy, library: ContentLibrary) -> list[str]:
    """Check the box constraint 0 <= c_m <= 1 and the budget sum(c) == M.

    Returns a list of human-readable violations; an empty list means the
    policy is feasible. A length mismatch is an error, not a violation.
    """
    c = policy.probs
    if c.size != library.n_files:
        raise ValueError(
            f"policy length {c.size} does not match library size {library.n_files}"
        )
    violations = []
    low = np.nonzero(c < -POLICY_BOX_TOL)[0]
    high = np.nonzero(c > 1.0 + POLICY_BOX_TOL)[0]
    for m in low:
        violations.append(f"c_{m + 1} = {c[m]:.6g} below 0")
    for m in high:
        violations.append(f"c_{m + 1} = {c[m]:.6g} above 1")
    total = float(c.sum())
    if abs(total - library.cache_size) > POLICY_SUM_TOL:
        violations.append(
            f"sum(c) = {total:.10g} differs from cache budget M = {library.cache_size}"
        )
    return violations


def require_valid_policy(policy: CachingPolicy, library: ContentLibrary) -> None:
    """Raise ValueError if the policy violates the caching constraints."""
    violations = validate_policy(policy, library)
    if violations:
        raise ValueError("infeasible caching policy: " + "; ".join(violations))


def policy_cpf(library: ContentLibrary) -> CachingPolicy:
    """Cache-popular-files baseline: deterministically cache the M most popular files."""
    c = np.zeros(library.n_files)
    c[: library.cache_size] = 1.0
    return CachingPolicy(c)


def policy_uniform(library: ContentLibrary) -> CachingPolicy:
    """Popularity-blind baseline: every file cached with probability M / N_f."""
    c = np.full(library.n_files, library.cache_size / library.n_files)
    return CachingPolicy(c)


def policy_zipf_proportional(library: ContentLibrary) -> CachingPolicy:
    """Popularity-proportional caching: c_m proportional to q_m, clipped at 1.

    Starts from c_m = M * q_m and, whenever some entries exceed 1, pins them
    at 1 and redistributes the excess budget over the remaining files in
    proportion to their popularity, until the box constraint holds. When no
    clipping is active the result is exactly M * q_m.
    """
    q = library.popularity
    m_budget = float(library.cache_size)
    c = np.zeros(library.n_files)
    free = np.ones(library.n_files, dtype=bool)
    remaining = m_budget
    # each pass pins at least one entry, so this terminates in <= N_f passes
    for _ in range(library.n_files):
        q_free = q[free]
        scale = remaining / q_free.sum()
        trial = scale * q_free
        if np.all(trial <= 1.0):
            c[free] = trial
            break
        newly_pinned = np.zeros_like(free)
        newly_pinned[free] = trial >= 1.0
        c[newly_pinned] = 1.0
        free &= ~newly_pinned
        remaining = m_budget - c[~free].sum()
        if not free.any():
            break
    return CachingPolicy(c)
