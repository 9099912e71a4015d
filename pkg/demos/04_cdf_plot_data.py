"""Plot data for marginal-CDF overlays.

Writes one CSV of interpolated-CDF knots per data category. Any plotting tool
can draw them against the diagonal y = x, which is the uniform reference.
"""

# %%
import sys
import tempfile
from pathlib import Path

import numpy as np

from umival import empirical_cdf, interpolate, ranked_kernel, rosenblatt_transform
from umival.io import emit_cdf_csv
from umival.models import MarkovKernel, sample_tokens, trace_under_model

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="umi-cdf-"))
out.mkdir(parents=True, exist_ok=True)

ref = ranked_kernel(np.random.default_rng(0), 8, 1)
sources = {
    "generated": ref,
    "random_tokens": MarkovKernel.from_rows(0, 8, [1 / 8] * 8),
}

# %%
for name, src in sources.items():
    trace = trace_under_model(sample_tokens(src, 3000, seed=1), ref)
    cdf = interpolate(empirical_cdf(rosenblatt_transform(trace, seed=0)), bins=50)
    emit_cdf_csv(cdf, out / f"{name}.csv")
    gap = np.max(np.abs(cdf.values - cdf.positions))
    print(f"{name:<14} {len(cdf.knots)} knots, largest gap to the diagonal {gap:.3f}")
print("CSV files written to", out)
