"""Happiness functions under which classical group-fairness criteria become happiness gaps.

Each constructor returns an expression-backed :class:`HappinessSpec`, so the
resulting functions can be rendered, inspected and reparsed like user input.
"""

from __future__ import annotations

import numpy as np

from .core import HappinessSpec, LabelSpace
from .expr import BinOp, Ident, Ind, Num

STATISTICAL_PARITY = "statistical-parity"
OVERALL_ACCURACY = "overall-accuracy"
EQUALIZED_ODDS = "equalized-odds"
CUSTOM = "custom"
CRITERION_KINDS = (STATISTICAL_PARITY, OVERALL_ACCURACY, EQUALIZED_ODDS, CUSTOM)


def _is(name, value):
    return Ind("==", Ident(name), Num(float(value)))


def statistical_parity_happiness(ls: LabelSpace) -> HappinessSpec:
    """One indicator per label: component ``j`` is ``1{yhat == j}``."""
    comps = tuple(_is("yhat", j) for j in range(len(ls)))
    names = tuple(f"rate[{label}]" for label in ls.labels)
    return HappinessSpec(comps, names, STATISTICAL_PARITY)


def overall_accuracy_happiness() -> HappinessSpec:
    return HappinessSpec((Ind("==", Ident("y"), Ident("yhat")),), ("accuracy",), OVERALL_ACCURACY)


def equalized_odds_happiness(ls: LabelSpace, p_y_given_z) -> HappinessSpec:
    """Components ``1{(y, yhat) == (a, b)} / p(y = a | z)`` for every label pair ``(a, b)``.

    ``p_y_given_z`` has shape ``(K, 2)``; its columns are the label
    frequencies within each group. Group-conditional expectations of these
    components are the group-conditional confusion rates.
    """
    k = len(ls)
    p = np.array(p_y_given_z, dtype=float)
    if p.shape != (k, 2):
        raise ValueError(f"p_y_given_z must have shape {(k, 2)}")
    if np.any(p <= 0):
        raise ValueError("equalized odds needs every label to occur in both groups")
    p.setflags(write=False)
    comps, names = [], []
    for a in range(k):
        # 1/p(a|z) selected by group indicator, so eta stays a pure expression
        weight = BinOp(
            "+",
            BinOp("/", _is("z", 0), Num(float(p[a, 0]))),
            BinOp("/", _is("z", 1), Num(float(p[a, 1]))),
        )
        for b in range(k):
            comps.append(BinOp("*", BinOp("*", _is("y", a), _is("yhat", b)), weight))
            names.append(f"odds[{ls.labels[a]}->{ls.labels[b]}]")
    return HappinessSpec(tuple(comps), tuple(names), EQUALIZED_ODDS, p)
