"""
Sampling the slice distributions
================================

The B-, W- and L-distributions are what you get by normalizing |dp/dtheta|
of a Gaussian.  Each sampler takes explicit uniforms, so a draw is a pure
function of its inputs.
"""

import numpy as np

from slicegrad import bench
from slicegrad import distributions as dist
from slicegrad.streams import substream

# %%
# A B-distribution draw is mu +- sigma sqrt(-2 log u): the height u picks
# the slice, the sign bit picks the side.
spec = dist.bdist(mu=1.0, sigma=2.0)
print(dist.sample(spec, (np.array([np.exp(-0.5), 1.0]), np.array([1.0, -1.0]))))

# %%
# Histogram checks against the analytic pdf, with a chi-square p-value.
for spec in (dist.bdist(), dist.wdist(), dist.ldist(), dist.trunc_ratio(0.5), dist.beta_slice(1.5)):
    rng = substream(0, "demo", spec.tag.value)
    rep = bench.dist_conformance_report(spec, 50_000, 60, rng)
    print(f"{spec.tag.value:>10}: chi2 = {rep.chi_square:7.1f} on {rep.dof:3d} dof, p = {rep.p_value:.3f}")

# %%
# The truncated-ratio family interpolates between the Gaussian (c = 0) and
# the B-distribution (large c); its variance grows from 1 toward 2.
for c in (0.0, 0.5, 2.0):
    spec = dist.trunc_ratio(c)
    x = dist.sample(spec, dist.draw_uniforms(spec, substream(1, "demo-v", c), 200_000))
    print(f"c = {c}: sample variance {x.var():.3f}")
