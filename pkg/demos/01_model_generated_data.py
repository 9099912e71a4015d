"""Valuing data against the model that produced it.

A reference Markov kernel plays the role of the language model. We score five
kinds of data under it: its own samples, samples drawn with altered sampling
methods, tokens from an unrelated random kernel, and a source that prefers the
tokens the reference finds least likely.
"""

# %%
import numpy as np

from umival import UmiConfig, Transform, random_kernel, ranked_kernel, reversed_kernel, transform_kernel, umi_value
from umival.models import sample_tokens, trace_under_model

V, N, TRIALS = 8, 2000, 40
cfg = UmiConfig()


def value(sampler, reference, seed):
    tokens = sample_tokens(sampler, N, seed)
    return umi_value(trace_under_model(tokens, reference), cfg)


# %% Score every category over a few reference kernels.
rows = {
    "same model": lambda ref, t: ref,
    "temperature 0.6": lambda ref, t: transform_kernel(ref, [Transform.parse("temperature=0.6")]),
    "top-k 3": lambda ref, t: transform_kernel(ref, [Transform.parse("top_k=3")]),
    "random kernel": lambda ref, t: random_kernel(np.random.default_rng(10**6 + t), V, 1),
    "reversed preferences": lambda ref, t: reversed_kernel(ref),
}
results = {name: [] for name in rows}
for t in range(TRIALS):
    ref = ranked_kernel(np.random.default_rng(t), V, 1)
    for j, (name, make) in enumerate(rows.items()):
        results[name].append(value(make(ref, t), ref, 10 * t + j))

# %% The same-model row sits near zero; everything else is pushed up.
print(f"{'data':<22}{'median value':>14}  branches")
for name, rs in results.items():
    branches = {}
    for r in rs:
        branches[r.branch.value] = branches.get(r.branch.value, 0) + 1
    med = np.median([r.value for r in rs])
    print(f"{name:<22}{med:>14.4f}  {branches}")

# %% Longer samples from the model itself look ever more uniform.
ref = ranked_kernel(np.random.default_rng(0), V, 1)
for n in (500, 2000, 8000):
    vals = [umi_value(trace_under_model(sample_tokens(ref, n, s), ref), cfg).divergence for s in range(40)]
    print(f"n={n:>5}: median divergence {np.median(vals):.4f}")
