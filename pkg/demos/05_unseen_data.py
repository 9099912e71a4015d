"""Unseen data and missing context.

A bigram model trained on one source is asked to value fresh text from the
same source and text from a different source. We also value a model response
without its prompt: tracing starts from the padded context instead.
"""

# %%
import numpy as np

from umival import UmiConfig, random_kernel, train_markov, umi_value
from umival.models import sample_tokens, trace_under_model

cfg = UmiConfig()
V = 6
source = random_kernel(np.random.default_rng(3), V, 1, concentration=0.5)
other = random_kernel(np.random.default_rng(4), V, 1, concentration=0.5)

corpus = [sample_tokens(source, 500, seed=s).tolist() for s in range(40)]
model = train_markov(corpus, order=1, laplace=1.0, vocab_size=V)

# %%
for name, src, seed in (("same source", source, 100), ("other source", other, 101)):
    r = umi_value(trace_under_model(sample_tokens(src, 3000, seed), model), cfg)
    print(f"{name:<13} value {r.value:.4f} ({r.branch.value})")

# %% Drop the first 200 tokens, as if the prompt were unknown.
response = sample_tokens(model, 3200, seed=7)[200:]
r = umi_value(trace_under_model(response, model), cfg)
print(f"response only  value {r.value:.4f} ({r.branch.value})")
