"""State spaces, weight functions, signed measures and the weighted norms.

Two norms are induced by a weight ``f >= 1``:

* on functions, ``||g||_f = sup_x |g(x)| / f(x)``;
* on signed measures, ``||mu||_f = sup_{|g| <= f} |mu(g)|``, which on a finite
  space equals ``sum_x f(x) |mu(x)|``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionError, InvalidModelError


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FiniteStateSpace:
    n: int
    labels: Optional[tuple] = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidModelError(f"state count must be a positive integer, got {self.n!r}")
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != self.n:
                raise InvalidModelError(f"expected {self.n} labels, got {len(labels)}")
            if len(set(labels)) != len(labels):
                raise InvalidModelError("state labels must be unique")
            object.__setattr__(self, "labels", labels)

    def label(self, i):
        return self.labels[i] if self.labels else str(i)


class WeightFunction:
    """A weight ``f >= 1``, either tabulated on a finite space or a field on R^d.

    A field is any callable mapping an ``(N, d)`` array of points to ``N``
    values. The lower bound is checked eagerly for tables and at every
    evaluation for fields.
    """

    def __init__(self, values: "Sequence[float] | np.ndarray | Callable" = None):
        if callable(values):
            self._field = values
            self._table = None
        else:
            table = np.asarray(values, dtype=float)
            if table.ndim != 1 or table.size == 0:
                raise DimensionError("weight table must be a nonempty 1-d sequence")
            _check_weight(table)
            self._table = _frozen(table)
            self._field = None

    @classmethod
    def constant(cls, n, value=1.0):
        return cls(np.full(n, float(value)))

    @property
    def is_table(self):
        return self._table is not None

    @property
    def table(self) -> np.ndarray:
        if self._table is None:
            raise TypeError("weight function is a field, not a table")
        return self._table

    def __len__(self):
        return len(self.table)

    def __call__(self, points):
        if self._table is not None:
            return self._table[np.asarray(points, dtype=int)]
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        vals = np.asarray(self._field(pts), dtype=float).reshape(len(pts))
        _check_weight(vals)
        return vals


def _check_weight(values):
    bad = ~(values >= 1.0)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise InvalidModelError(f"weight must satisfy f >= 1, got f={values[i]!r} at index {i}")


def as_weight(f, n=None) -> WeightFunction:
    """Coerce a table, scalar, callable or WeightFunction into a WeightFunction."""
    if isinstance(f, WeightFunction):
        w = f
    elif np.isscalar(f):
        if n is None:
            raise DimensionError("a scalar weight needs the state count")
        w = WeightFunction.constant(n, f)
    else:
        w = WeightFunction(f)
    if n is not None and w.is_table and len(w) != n:
        raise DimensionError(f"weight has {len(w)} entries, state space has {n}")
    return w


@dataclass(frozen=True)
class FiniteSignedMeasure:
    mass: np.ndarray

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=float)
        if mass.ndim != 1 or mass.size == 0:
            raise DimensionError("measure must be a nonempty 1-d table")
        object.__setattr__(self, "mass", _frozen(mass))

    @property
    def n(self):
        return self.mass.size

    @property
    def total_mass(self):
        return float(self.mass.sum())

    def __sub__(self, other):
        return FiniteSignedMeasure(self.mass - _mass(other))

    def __add__(self, other):
        return FiniteSignedMeasure(self.mass + _mass(other))

    def apply(self, kernel) -> "FiniteSignedMeasure":
        """Return the measure ``mu K``, ``(mu K)(y) = sum_x mu(x) K(x, y)``."""
        return FiniteSignedMeasure(self.mass @ np.asarray(kernel, dtype=float))

    def integrate(self, g) -> float:
        return float(self.mass @ np.asarray(g, dtype=float))


def _mass(mu):
    return mu.mass if isinstance(mu, FiniteSignedMeasure) else np.asarray(mu, dtype=float)


class FiniteSet:
    """A subset of ``{0, ..., n-1}``; every subset of a finite space is closed."""

    closed = True

    def __init__(self, indices, n):
        idx = sorted({int(i) for i in indices})
        if idx and (idx[0] < 0 or idx[-1] >= n):
            raise DimensionError(f"set indices {idx} out of range for {n} states")
        self.n = int(n)
        self.indices = tuple(idx)
        mask = np.zeros(self.n, dtype=bool)
        mask[list(idx)] = True
        mask.setflags(write=False)
        self.mask = mask

    @classmethod
    def whole(cls, n):
        return cls(range(n), n)

    def __contains__(self, x):
        return int(x) in self.indices

    def __len__(self):
        return len(self.indices)

    def __repr__(self):
        return f"FiniteSet({list(self.indices)}, n={self.n})"

    @property
    def indicator(self):
        return self.mask.astype(float)

    @property
    def complement(self) -> np.ndarray:
        return ~self.mask


def as_finite_set(C, n) -> FiniteSet:
    if isinstance(C, FiniteSet):
        if C.n != n:
            raise DimensionError(f"set lives on {C.n} states, chain has {n}")
        return C
    return FiniteSet(C, n)


class RegionSet:
    """A set in R^d given by a vectorized predicate plus a sampling box.

    ``closed`` records whether the constructor guarantees closedness
    (boxes, closed balls and sublevel sets of continuous fields do).
    """

    def __init__(self, predicate, bounds, closed=False, description=""):
        bounds = np.asarray(bounds, dtype=float)
        if bounds.ndim != 2 or bounds.shape[1] != 2 or np.any(bounds[:, 0] > bounds[:, 1]):
            raise DimensionError("bounds must be a (d, 2) array of [low, high] rows")
        self._predicate = predicate
        self.bounds = _frozen(bounds)
        self.closed = bool(closed)
        self.description = description

    @property
    def d(self):
        return self.bounds.shape[0]

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.d:
            raise DimensionError(f"points have dimension {pts.shape[1]}, set has {self.d}")
        return np.asarray(self._predicate(pts), dtype=bool).reshape(len(pts))

    def indicator(self, points):
        return self.contains(points).astype(float)

    @classmethod
    def box(cls, bounds):
        bounds = np.asarray(bounds, dtype=float)
        lo, hi = bounds[:, 0], bounds[:, 1]

        def inside(p):
            return np.all((p >= lo) & (p <= hi), axis=1)

        return cls(inside, bounds, closed=True, description=f"box {bounds.tolist()}")

    @classmethod
    def ball(cls, center, radius):
        center = np.asarray(center, dtype=float)
        r = float(radius)

        def inside(p):
            return np.sum((p - center) ** 2, axis=1) <= r * r

        bounds = np.stack([center - r, center + r], axis=1)
        return cls(inside, bounds, closed=True, description=f"ball({center.tolist()}, {r})")

    @classmethod
    def sublevel(cls, field, threshold, bounds):
        c = float(threshold)

        def inside(p):
            return np.asarray(field(p)) <= c

        return cls(inside, bounds, closed=True, description=f"sublevel <= {c}")


def f_norm_of_function(g, f, sample=None) -> float:
    """Weighted sup norm ``max |g| / f``.

    On a finite space ``g`` and ``f`` are tables and the result is exact. For
    fields, ``sample`` is an ``(N, d)`` array and the maximum over it is a
    lower bound on the true supremum.
    """
    if sample is not None:
        pts = np.atleast_2d(np.asarray(sample, dtype=float))
        if pts.size == 0:
            raise DimensionError("sample set is empty")
        gv = np.asarray(g(pts) if callable(g) else g, dtype=float).reshape(-1)
        w = as_weight(f)
        fv = w(pts) if not w.is_table else w.table
    else:
        gv = np.asarray(g, dtype=float).reshape(-1)
        fv = as_weight(f, n=gv.size).table
    if gv.shape != fv.shape:
        raise DimensionError(f"g has {gv.size} entries, f has {fv.size}")
    return float(np.max(np.abs(gv) / fv))


def f_norm_of_measure(mu, f) -> float:
    """``||mu||_f = sum_x f(x) |mu(x)|``, the supremum of ``|mu(g)|`` over ``|g| <= f``."""
    mass = _mass(mu)
    fv = as_weight(f, n=mass.size).table
    return float(np.abs(mass) @ fv)


def jordan_decompose(mu):
    """Split ``mu`` into nonnegative parts with disjoint supports, ``mu = plus - minus``."""
    mass = _mass(mu)
    plus = np.where(mass > 0, mass, 0.0)
    minus = np.where(mass < 0, -mass, 0.0)
    return FiniteSignedMeasure(plus), FiniteSignedMeasure(minus)
