"""
Equal funding on synthetic loan data
====================================

A soft classifier approves loans fairly with respect to income, yet one
group systematically asks for more money. We compare post-processing for
equal funding against classical criteria, measuring the funding gap.
"""

# %%
import numpy as np

from happyfair.baseline import ForestConfig, predict_dataset, split_dataset, train_forest
from happyfair.criteria import equalized_odds_happiness, statistical_parity_happiness
from happyfair.data import SyntheticConfig, equal_funding_happiness, generate_synthetic, money
from happyfair.estimators import estimate_moments
from happyfair.postprocess import ALPHA_SWEEP, EPS_SWEEP, default_alpha_grid, default_eps_grid, sweep

# %% [markdown]
# Generate the data and split it 20/16/64 into train, validation and test.

# %%
data = generate_synthetic(SyntheticConfig(seed=0))
train, val, test = split_dataset(data, seed=0)
print(len(train), len(val), len(test))
print("approval rate by group:", [round(data.y[data.z == g].mean(), 3) for g in (0, 1)])

# %%
model = train_forest(train, ForestConfig(seed=0))
val, test = predict_dataset(model, val), predict_dataset(model, test)
print("test soft accuracy", test.p_hat[np.arange(len(test)), test.y].mean())

# %% [markdown]
# Happiness is the approved loan amount. Moments are fit on validation data.

# %%
funding = equal_funding_happiness()
m_val, m_test = estimate_moments(val, funding), estimate_moments(test, funding)

curve_val, curve_test = sweep(m_val, m_val, m_test, default_alpha_grid(m_val, 12), ALPHA_SWEEP)
for p, q in zip(curve_val.points, curve_test.points):
    print(f"alpha {p.constraint_value:.3f}  val acc {p.accuracy:.3f} gap {money(p.gap[0]):>10}"
          f"  test acc {q.accuracy:.3f} gap {money(q.gap[0]):>10}")

# %% [markdown]
# Statistical parity and equalized odds, enforced one at a time, leave the funding gap in place.

# %%
for name, spec in (("statistical parity", statistical_parity_happiness(val.label_space)),
                   ("equalized odds", equalized_odds_happiness(val.label_space, m_val.p_y_given_z))):
    m_fit = estimate_moments(val, spec)
    cv, _ = sweep(m_fit, m_val, m_test, default_eps_grid(m_fit, 10), EPS_SWEEP)
    gaps = [abs(p.gap[0]) for p in cv.feasible()]
    print(f"{name:>20}: funding gap between {money(min(gaps))} and {money(max(gaps))}")

# %%
print(curve_val.to_csv().splitlines()[0])
