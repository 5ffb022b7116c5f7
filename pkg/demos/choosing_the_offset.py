"""
Choosing the truncated-ratio offset
===================================

A larger offset c makes each coordinate's gradient more accurate by t(c)
but spreads its samples by v(c), which leaks as noise into the other D - 1
coordinates.  The break-even point depends on D.
"""

from slicegrad.analysis import accuracy_t, guideline_table, suggest_c, variance_scale_v

# %%
# The guideline table: for each c, the number of other coordinates at which
# the extra spread cancels the accuracy gain.
print(f"{'c':>4} {'D-1':>8} {'t(c)':>6}")
for row in guideline_table():
    print(f"{row.c:4.1f} {row.dim_minus_one:8.1f} {row.accuracy_t:6.3f}")

# %%
# Going the other way: the offset to use for a given dimension.
for dim in (20, 72, 1000, 10**6):
    c = suggest_c(dim)
    print(f"D = {dim:>7}: c = {c:.4f}  (t = {accuracy_t(c):.3f}, v = {variance_scale_v(c):.3f})")
