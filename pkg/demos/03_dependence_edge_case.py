"""Uniform marginals are not enough.

An antithetic stream pairs every value ``u`` with ``1 - u``. Its marginal is
exactly uniform, so the divergence gate passes, but the independence battery
catches the pairing and the datapoint receives the fixed penalty value.
"""

# %%
import numpy as np

from umival import UmiConfig, ZSequence, battery
from umival.value import umi_from_z

cfg = UmiConfig()
u = np.random.default_rng(1).random(1000)
antithetic = ZSequence.of(np.column_stack([u, 1 - u]).ravel())
independent = ZSequence.of(np.random.default_rng(2).random(2000))

# %%
for name, z in (("independent", independent), ("antithetic", antithetic)):
    r = umi_from_z(z, cfg)
    print(f"{name:<12} divergence {r.divergence:.4f} -> value {r.value:.4f} ({r.branch.value})")

# %% Which tests object to the antithetic stream?
for o in battery(antithetic, cfg).outcomes:
    p = "   n/a" if o.p_value is None else f"{o.p_value:6.3g}"
    print(f"  {o.test_id:<20} statistic {o.statistic:10.4f}  p {p}  {'pass' if o.passed else 'FAIL'}")
