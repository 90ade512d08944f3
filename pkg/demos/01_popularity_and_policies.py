"""Content popularity and baseline caching policies.

Builds a Zipf-distributed content library, then shows the three baseline
placement policies side by side: cache-most-popular, uniform, and
popularity-proportional. Each assigns a caching probability per file under
the same total cache budget.
"""

import numpy as np

from d2dcache.model import (
    ContentLibrary,
    policy_cpf,
    policy_uniform,
    policy_zipf_proportional,
    validate_policy,
)

library = ContentLibrary.from_zipf(n_files=20, beta=0.8, cache_size=4)
q = library.popularity

print(f"library: {library.n_files} files, Zipf exponent {library.beta}, "
      f"cache budget {library.cache_size}")
print(f"popularity head {np.round(q[:4], 4)} ... tail {np.round(q[-2:], 4)}")
print(f"normalization check: sum q = {q.sum():.15f}")
print()

policies = {
    "cache-most-popular": policy_cpf(library),
    "uniform": policy_uniform(library),
    "popularity-proportional": policy_zipf_proportional(library),
}

print(f"{'file':>4} {'popularity':>11} " + " ".join(f"{n:>24}" for n in policies))
for m in range(6):
    row = " ".join(f"{pol.probs[m]:>24.4f}" for pol in policies.values())
    print(f"{m:>4} {q[m]:>11.4f} {row}")
print(" ...")
print()

for name, pol in policies.items():
    budget = pol.probs.sum()
    issues = validate_policy(pol, library)
    status = "feasible" if not issues else f"violations: {issues}"
    print(f"{name}: budget used {budget:.6f}, {status}")
