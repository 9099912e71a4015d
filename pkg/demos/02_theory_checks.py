"""The exact oracles behind the value function.

For iid data the divergence of the transformed values from the uniform equals
the divergence between the data and model distributions. For Markov sources
the long-run marginal only bounds the per-context divergence from below.
"""

# %%
import numpy as np

from umival import (
    MarkovKernel,
    divergence_to_uniform,
    exact_z_cdf_iid,
    fdiv_discrete,
    markov_weighted_divergence,
    mixture_marginal_cdf,
    stationary_distribution,
)

# %% A two-token example worked by hand: q = (0.9, 0.1) scored under p = (0.5, 0.5).
p, q = [0.5, 0.5], [0.9, 0.1]
g = exact_z_cdf_iid(p, q)
print("knots of the exact z CDF:", g.knots)
print(f"KL(G || U) = {divergence_to_uniform(g):.6f}   KL(q || p) = {fdiv_discrete(q, p):.6f}")

# %% Random pairs agree to rounding error.
rng = np.random.default_rng(0)
worst = 0.0
for _ in range(200):
    k = int(rng.integers(2, 30))
    p, q = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
    worst = max(worst, abs(divergence_to_uniform(exact_z_cdf_iid(p, q)) - fdiv_discrete(q, p)))
print(f"largest iid discrepancy over 200 pairs: {worst:.2e}")

# %% Markov case: the mixture over contexts can hide per-context mismatch.
P = MarkovKernel.from_rows(1, 2, {(1,): [0.9, 0.1], (2,): [0.1, 0.9]})
Q = MarkovKernel.from_rows(1, 2, {(1,): [0.1, 0.9], (2,): [0.9, 0.1]})
print("stationary law of Q:", stationary_distribution(Q).as_dict())
print(f"marginal divergence  {divergence_to_uniform(mixture_marginal_cdf(P, Q)):.4f}")
print(f"weighted divergence  {markov_weighted_divergence(P, Q):.4f}")
