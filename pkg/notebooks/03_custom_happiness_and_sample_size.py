"""
Custom happiness expressions and validation-set size
====================================================
"""

# %%
import numpy as np

from happyfair.core import happiness_from_exprs
from happyfair.data import financial_happiness, rho, roi_bonus
from happyfair.estimators import sample_size_bound
from happyfair.expr import ExprSyntaxError, parse, render

# %% [markdown]
# Happiness functions can be written as expressions over the prediction
# `yhat`, the label `y`, the group `z` and the features.

# %%
schema = {"hours_per_week": None, "loan_requested": None, "sex": ("Male", "Female")}
spec = happiness_from_exprs(["100 * yhat - hours_per_week",
                             'yhat * loan_requested * (1 + 0.1 * eq(sex, "Female"))'], schema)
x = {"hours_per_week": np.array([40.0, 60.0]), "loan_requested": np.array([5e5, 5.5e5]),
     "sex": np.array(["Male", "Female"], dtype=object)}
print(spec.evaluate(np.array([1, 0]), x, np.array([1, 1]), np.array([0, 1])))

# %%
print(render(parse("-(yhat - 1) * 2 + ind(y == yhat)")))
try:
    parse("yhat * (1 + ")
except ExprSyntaxError as err:
    print(err, "at byte", err.offset)

# %% [markdown]
# The interest-rate and return tables behind the financial utility.

# %%
print([rho(s) for s in (580, 620, 680, 720, 800)])
applicant = {"loan_purpose": "Education", "education_level": "Doctorate", "employment_status": "Employed",
             "tenure": 6, "loan_requested": 100000.0, "credit_score": 760, "duration": 10}
print(roi_bonus(applicant), financial_happiness(1, applicant, 1, 0))

# %% [markdown]
# How many validation samples per group keep every moment within delta.

# %%
for delta in (0.01, 0.02, 0.04):
    print(delta, sample_size_bound(0.01, delta, 1, 2, 2))
