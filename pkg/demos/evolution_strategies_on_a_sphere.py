"""
Evolution strategies on a noisy sphere
======================================

ES ascends phi(w) = -|w - 0.5|^2 + noise in 71 dimensions, the size of the
default cart-pole policy, with each of the four mean-gradient estimators.
"""

import numpy as np

from slicegrad.es import ESConfig, SphereObjective, es_train

objective = SphereObjective(71, center=0.5, noise_sigma=1.0)

# %%
# Plain gradient ascent with a small step, so the estimators differ only in
# their noise.  Training and evaluation draw from separate streams.
for kind in ("glr", "slrg", "trrg:0.5", "brg:1.1"):
    cfg = ESConfig(estimator=kind, optimizer="sgd", lr=0.002, iterations=400, eval_every=50, seed=0)
    log = es_train(cfg, objective)
    print(f"{kind:>9}: eval {log.eval_rewards[0]:7.2f} -> {log.eval_rewards[-1]:7.2f}, "
          f"mean gradient variance {np.mean(log.grad_variances):.2f}")

# %%
# The log is one row per iteration and writes straight to CSV.
print(log.to_csv().splitlines()[0])
