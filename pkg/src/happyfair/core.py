"""Label spaces, datasets and happiness functions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from . import expr as _expr

PROB_TOL = 1e-9

# A feature schema maps each feature name to None (numeric) or a tuple of
# allowed categories (categorical).
Schema = Mapping[str, "tuple[str, ...] | None"]


@dataclass(frozen=True)
class LabelSpace:
    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) < 2:
            raise ValueError("a label space needs at least two labels")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"duplicate labels in {self.labels}")

    def __len__(self):
        return len(self.labels)

    def index(self, label) -> int:
        return self.labels.index(label)

    @classmethod
    def binary(cls) -> "LabelSpace":
        return cls((0, 1))

    @classmethod
    def of_size(cls, k: int) -> "LabelSpace":
        return cls(tuple(range(k)))


@dataclass(frozen=True)
class Sample:
    features: Mapping[str, object]
    y: int
    z: int
    p_hat: np.ndarray | None = None


def check_distribution(p, tol=PROB_TOL, what="probability vector"):
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1.0) > tol:
        raise ValueError(f"{what} {p.tolist()} is not a distribution")
    return p


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-oriented collection of samples.

    ``features`` holds one array per schema entry, ``y`` label indices,
    ``z`` group bits and ``p_hat`` an ``(N, K)`` matrix of soft predictions
    (``None`` until a classifier has been applied). ``meta`` carries
    auxiliary columns that are neither features nor targets.
    """

    label_space: LabelSpace
    schema: Schema
    features: Mapping[str, np.ndarray]
    y: np.ndarray
    z: np.ndarray
    p_hat: np.ndarray | None = None
    meta: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.int64)
        z = np.asarray(self.z, dtype=np.int64)
        n = len(y)
        if z.shape != (n,):
            raise ValueError("y and z must have the same length")
        if n and (y.min() < 0 or y.max() >= len(self.label_space)):
            raise ValueError("label index out of range")
        if n and not np.isin(z, (0, 1)).all():
            raise ValueError("group bits must be 0 or 1")
        feats = {}
        for name, categories in self.schema.items():
            if name not in self.features:
                raise ValueError(f"missing feature column {name!r}")
            col = np.asarray(self.features[name])
            if col.shape != (n,):
                raise ValueError(f"feature {name!r} has wrong length")
            if categories is None:
                col = col.astype(float)
            else:
                col = col.astype(object)
                bad = ~np.isin(col, list(categories))
                if bad.any():
                    raise ValueError(
                        f"feature {name!r}: unknown category {col[bad][0]!r}"
                    )
            col.setflags(write=False)
            feats[name] = col
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "schema", dict(self.schema))
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)
        if self.p_hat is not None:
            p = np.asarray(self.p_hat, dtype=float)
            if p.shape != (n, len(self.label_space)):
                raise ValueError(f"p_hat has shape {p.shape}, expected {(n, len(self.label_space))}")
            if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1) > PROB_TOL):
                raise ValueError("p_hat rows must be probability vectors")
            p.setflags(write=False)
            object.__setattr__(self, "p_hat", p)
        for arr in (y, z):
            arr.setflags(write=False)

    def __len__(self):
        return len(self.y)

    def __getitem__(self, i) -> Sample:
        x = {name: col[i] for name, col in self.features.items()}
        p = None if self.p_hat is None else self.p_hat[i]
        return Sample(x, int(self.y[i]), int(self.z[i]), p)

    def __iter__(self) -> Iterator[Sample]:
        return (self[i] for i in range(len(self)))

    @property
    def samples(self) -> list:
        return list(self)

    def group_counts(self) -> tuple:
        n1 = int(self.z.sum())
        return len(self) - n1, n1

    def take(self, index) -> "Dataset":
        index = np.asarray(index)
        return Dataset(
            self.label_space,
            self.schema,
            {k: v[index] for k, v in self.features.items()},
            self.y[index],
            self.z[index],
            None if self.p_hat is None else self.p_hat[index],
            {k: v[index] for k, v in self.meta.items()},
        )

    def with_predictions(self, p_hat) -> "Dataset":
        return Dataset(
            self.label_space, self.schema, self.features, self.y, self.z, p_hat, self.meta
        )

    @classmethod
    def from_samples(cls, label_space, schema, samples: Sequence[Sample]) -> "Dataset":
        samples = list(samples)
        features = {
            name: np.array([s.features[name] for s in samples], dtype=object if cats else float)
            for name, cats in schema.items()
        }
        p = None
        if samples and samples[0].p_hat is not None:
            p = np.array([s.p_hat for s in samples], dtype=float)
        return cls(
            label_space,
            schema,
            features,
            np.array([s.y for s in samples], dtype=np.int64),
            np.array([s.z for s in samples], dtype=np.int64),
            p,
        )


# -- happiness functions -----------------------------------------------------

# A component is either a parsed expression or a vectorised callable
# f(yhat, x, y, z) -> array, where x maps feature names to arrays.
Component = "_expr.Expr | Callable"


@dataclass(frozen=True, eq=False)
class HappinessSpec:
    """Vector-valued happiness function eta(yhat, x, y, z) -> R^n."""

    components: tuple
    names: tuple = ()
    kind: str = "custom"
    p_y_given_z: np.ndarray | None = None

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("a happiness spec needs at least one component")
        names = tuple(self.names) or tuple(f"eta_{i}" for i in range(len(comps)))
        if len(names) != len(comps):
            raise ValueError("one name per component required")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "names", names)

    @property
    def dim(self) -> int:
        return len(self.components)

    def features_used(self) -> set:
        used = set()
        for comp in self.components:
            if not callable(comp):
                used |= _expr.identifiers(comp)
        return used

    def evaluate(self, yhat, x: Mapping[str, object], y, z) -> np.ndarray:
        """Evaluate all components; returns an array of shape ``broadcast + (n,)``.

        ``yhat``, ``y``, ``z`` and the feature values may be scalars or
        equally shaped arrays.
        """
        shape = np.broadcast_shapes(np.shape(yhat), np.shape(y), np.shape(z))
        env = dict(x)
        env.update(yhat=yhat, y=y, z=z)
        cols = []
        for comp in self.components:
            if callable(comp):
                value = comp(yhat, x, y, z)
            else:
                value = _expr.evaluate(comp, env)
            value = np.asarray(value, dtype=float)
            shape = np.broadcast_shapes(shape, value.shape)
            cols.append(value)
        out = np.stack([np.broadcast_to(c, shape) for c in cols], axis=-1)
        if not np.all(np.isfinite(out)):
            raise _expr.ExprEvalError("happiness evaluated to a non-finite value")
        return out

    def render(self) -> list:
        return [
            getattr(c, "__name__", repr(c)) if callable(c) else _expr.render(c)
            for c in self.components
        ]


def parse_happiness_expr(text: str, schema: Schema | None = None) -> _expr.Expr:
    """Parse one happiness expression, checking identifiers against ``schema``."""
    return _expr.parse(text, schema)


def happiness_from_exprs(texts, schema: Schema | None = None, kind="custom") -> HappinessSpec:
    if isinstance(texts, str):
        texts = [texts]
    return HappinessSpec(tuple(parse_happiness_expr(t, schema) for t in texts), tuple(texts), kind)


def eval_happiness(spec: HappinessSpec, yhat, x: Mapping[str, object], y, z) -> np.ndarray:
    """Happiness vector for a single individual."""
    return spec.evaluate(yhat, x, y, z).reshape(spec.dim)
