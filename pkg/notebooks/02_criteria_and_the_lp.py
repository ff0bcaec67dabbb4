"""
Classical criteria as happiness gaps, and the post-processing LP
================================================================
"""

# %%
import math

import numpy as np

from happyfair.core import LabelSpace
from happyfair.criteria import equalized_odds_happiness, statistical_parity_happiness
from happyfair.estimators import EmpiricalMoments
from happyfair.lp import build_fair_lp, build_gap_lp, extract_postprocessor, solve_lp
from happyfair.postprocess import accuracy, happiness_gap

# %% [markdown]
# A joint law of (prediction, label, group). Under the parity happiness
# function the group-conditional means are the prediction rates.

# %%
rng = np.random.default_rng(1)
joint = rng.dirichlet(np.ones(8)).reshape(2, 2, 2)  # [yhat, y, z]
ls = LabelSpace.binary()
sp = statistical_parity_happiness(ls)
for z in (0, 1):
    cond = joint[:, :, z] / joint[:, :, z].sum()
    mean = sum(cond[h, y] * sp.evaluate(h, {}, y, z) for h in range(2) for y in range(2))
    print("group", z, "mean happiness", mean, "prediction rates", cond.sum(axis=1))

# %%
p_y_given_z = joint.sum(axis=0) / joint.sum(axis=(0, 1))
eo = equalized_odds_happiness(ls, p_y_given_z)
print(eo.names)
print(eo.render()[3])

# %% [markdown]
# Turn the law into moments for a soft classifier that outputs the
# prediction directly, then solve both programs.

# %%
p_z = joint.sum(axis=(0, 1))
xi = np.zeros((2, 2, 2, 1))
for yt in range(2):
    xi[yt, :, :, 0] = joint.sum(axis=1) * (yt == 1) / p_z  # parity for label 1
m = EmpiricalMoments(joint, xi, p_z, p_y_given_z)

for eps in (0.0, 0.05, math.inf):
    lp = build_fair_lp(m, eps)
    sol = solve_lp(lp)
    pp = extract_postprocessor(lp, sol)
    print(f"eps {eps}: accuracy {accuracy(pp, m):.4f}, gap {happiness_gap(pp, m)[0]:+.4f}, "
          f"{sol.iterations} pivots")

# %%
print(build_gap_lp(m, 0.5).to_lp_text())
