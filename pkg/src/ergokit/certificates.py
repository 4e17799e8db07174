"""Drift certificates ``(V, f, C, b, delta)`` and their margin reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np


@dataclass(frozen=True)
class DriftCertificate:
    """Claims ``D V <= -delta * f + b * 1_C``.

    ``V`` and ``f`` are tables (finite chains) or scalar fields (diffusions);
    ``C`` is a :class:`~ergokit.measures.FiniteSet` or
    :class:`~ergokit.measures.RegionSet`. Table entries of ``V`` may be ``inf``.
    """

    V: Any
    f: Any
    C: Any
    b: float
    delta: float = 1.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not np.isfinite(self.b):
            raise ValueError(f"b must be finite, got {self.b}")
        if isinstance(self.V, np.ndarray) or isinstance(self.V, (list, tuple)):
            V = np.array(self.V, dtype=float)
            if np.any(V <= 0) or np.any(np.isnan(V)):
                raise ValueError("V must take values in (0, inf]")
            if not np.any(np.isfinite(V)):
                raise ValueError("V must be finite at one state at least")
            V.setflags(write=False)
            object.__setattr__(self, "V", V)

    def scaled(self, factor):
        """Scale ``V``, ``f`` and ``b`` together; validity is unchanged for a fixed delta."""
        from .measures import WeightFunction  # local: avoids a cycle at import time

        if isinstance(self.V, np.ndarray):
            f = WeightFunction(factor * np.asarray(_table(self.f)))
            return DriftCertificate(factor * self.V, f, self.C, factor * self.b, self.delta)
        V, f = self.V, self.f
        return DriftCertificate(V.scaled(factor), f.scaled(factor), self.C, factor * self.b, self.delta)


def _table(f):
    return f.table if hasattr(f, "table") else f


@dataclass
class MarginReport:
    """Pointwise margins ``D V + delta f - b 1_C``; valid when all are <= tolerance."""

    margins: np.ndarray
    tolerance: float
    points: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)

    @property
    def max_margin(self) -> float:
        return float(np.nanmax(self.margins))

    @property
    def worst_index(self) -> int:
        return int(np.nanargmax(self.margins))

    @property
    def worst_point(self):
        if self.points is None:
            return self.worst_index
        return np.asarray(self.points)[self.worst_index]

    @property
    def valid(self) -> bool:
        return self.max_margin <= self.tolerance
