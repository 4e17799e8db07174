"""Euler-Maruyama simulation and Monte Carlo functionals for diffusions on R^d.

The model is ``dX = u(X) dt + M(X) dB`` with ``B`` a ``k``-dimensional
Brownian motion. Fields are vectorized: they take an ``(N, d)`` array of
points (and a time) and return one value, vector or matrix per point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import dsl
from .certificates import DriftCertificate, MarginReport
from .errors import CensoredError, DimensionError, DomainError, ExplosionError, InvalidModelError
from .measures import RegionSet
from .montecarlo import MCEstimate, batch_means, path_blocks, summarize

T_CAP = 1e3


class ScalarField:
    """A function ``R^d -> R`` with optional closed-form gradient and Hessian.

    ``fn`` maps ``(N, d)`` points to ``N`` values, ``grad`` to ``(N, d)`` and
    ``hess`` to ``(N, d, d)``.
    """

    def __init__(self, fn: Callable, d: int, grad: Optional[Callable] = None,
                 hess: Optional[Callable] = None, name: str = ""):
        self.fn = fn
        self.d = int(d)
        self.grad = grad
        self.hess = hess
        self.name = name

    @classmethod
    def from_expr(cls, source, d):
        e = source if isinstance(source, dsl.Expr) else dsl.parse(source, d)
        return cls(e, d, name=dsl.to_source(e.tree))

    @classmethod
    def constant(cls, value, d):
        v = float(value)
        return cls(
            lambda X: np.full(len(X), v), d,
            grad=lambda X: np.zeros((len(X), d)),
            hess=lambda X: np.zeros((len(X), d, d)),
            name=repr(v),
        )

    def __call__(self, points):
        X = _points(points, self.d)
        return np.asarray(self.fn(X), dtype=float).reshape(len(X))

    def scaled(self, factor):
        c = float(factor)
        grad = (lambda X: c * self.grad(X)) if self.grad else None
        hess = (lambda X: c * self.hess(X)) if self.hess else None
        return ScalarField(lambda X: c * self.fn(X), self.d, grad, hess, f"{c}*({self.name})")


def _points(points, d):
    X = np.atleast_2d(np.asarray(points, dtype=float))
    if X.shape[1] != d:
        raise DimensionError(f"points have dimension {X.shape[1]}, expected {d}")
    return X


@dataclass(frozen=True)
class DiffusionModel:
    d: int
    k: int
    drift: Callable  # (N, d), t -> (N, d)
    dispersion: Callable  # (N, d), t -> (N, d, k)
    name: str = ""

    def u(self, X, t=0.0):
        return np.asarray(self.drift(X, t), dtype=float).reshape(len(X), self.d)

    def M(self, X, t=0.0):
        return np.asarray(self.dispersion(X, t), dtype=float).reshape(len(X), self.d, self.k)

    def sigma(self, X, t=0.0):
        """``Sigma = M M^T`` at each point."""
        M = self.M(X, t)
        return np.einsum("nik,njk->nij", M, M)

    @classmethod
    def from_expressions(cls, drift, dispersion, name=""):
        """Build from DSL sources: ``d`` drift strings and a ``d x k`` dispersion table."""
        d = len(drift)
        if d == 0 or len(dispersion) != d or any(len(row) != len(dispersion[0]) for row in dispersion):
            raise DimensionError("dispersion must be a d x k table matching the drift length")
        k = len(dispersion[0])
        u_exprs = [dsl.parse(s, d) for s in drift]
        m_exprs = [[dsl.parse(s, d) for s in row] for row in dispersion]

        def drift_fn(X, t=0.0):
            out = np.empty((len(X), d))
            for i, e in enumerate(u_exprs):
                out[:, i] = e.raw(X, t)
            return out

        if all(e.is_constant for row in m_exprs for e in row):
            const = np.array([[dsl.evaluate(e, np.zeros(d)) for e in row] for row in m_exprs])

            def disp_fn(X, t=0.0):
                return np.broadcast_to(const, (len(X), d, k))
        else:
            def disp_fn(X, t=0.0):
                out = np.empty((len(X), d, k))
                for i, row in enumerate(m_exprs):
                    for j, e in enumerate(row):
                        out[:, i, j] = e.raw(X, t)
                return out

        return cls(d, k, drift_fn, disp_fn, name)


def ornstein_uhlenbeck(theta=1.0, sigma=np.sqrt(2.0)):
    """``dX = -theta X dt + sigma dB`` in one dimension; stationary law N(0, sigma^2 / 2 theta)."""
    return DiffusionModel(
        1, 1,
        lambda X, t=0.0: -theta * X,
        lambda X, t=0.0: np.full((len(X), 1, 1), sigma),
        "ou",
    )


def double_well(sigma=np.sqrt(2.0)):
    """``dX = (X - X^3) dt + sigma dB``, gradient flow of ``x^4/4 - x^2/2``."""
    return DiffusionModel(
        1, 1,
        lambda X, t=0.0: X - X**3,
        lambda X, t=0.0: np.full((len(X), 1, 1), sigma),
        "double-well",
    )


BUILTIN_MODELS = {"ou": ornstein_uhlenbeck, "double-well": double_well}


@dataclass
class PathSample:
    times: np.ndarray
    states: np.ndarray
    occupation_C: Optional[np.ndarray] = None


def _step(model, X, t, dt, dB):
    return X + model.u(X, t) * dt + np.einsum("nik,nk->ni", model.M(X, t), dB)


def _check_finite(X, t):
    if not np.all(np.isfinite(X)):
        raise ExplosionError(f"non-finite state at t={t:.6g}")


def simulate_path(model: DiffusionModel, x0, dt: float, T: float, seed: int, C: Optional[RegionSet] = None):
    """One Euler-Maruyama path on the grid ``0, dt, 2dt, ...`` up to ``T``.

    Occupation of ``C`` is accumulated with the left-endpoint rule.
    """
    if not dt > 0 or not T > 0:
        raise ValueError("dt and T must be positive")
    n = int(np.ceil(T / dt - 1e-9))
    x = _points(x0, model.d)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0, 0]))
    noise = rng.standard_normal((n, model.k)) * np.sqrt(dt)
    states = np.empty((n + 1, model.d))
    states[0] = x[0]
    drift, disp = model.drift, model.dispersion
    shape_u, shape_m = (1, model.d), (model.d, model.k)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            t = i * dt
            try:
                x = x + np.reshape(drift(x, t), shape_u) * dt + np.reshape(disp(x, t), shape_m) @ noise[i]
            except DomainError as exc:
                raise ExplosionError(f"coefficients not finite at t={t:.6g}: {exc}") from exc
            states[i + 1] = x[0]
            if not np.isfinite(x).all():
                states[i + 2:] = np.nan
                break
    if not np.all(np.isfinite(states)):
        bad = int(np.argmax(~np.all(np.isfinite(states), axis=1)))
        raise ExplosionError(f"non-finite state at t={bad * dt:.6g}")
    times = np.arange(n + 1) * dt
    occ = None
    if C is not None:
        inside = C.contains(states[:-1]).astype(float)
        occ = np.concatenate([[0.0], np.cumsum(inside * dt)])
    return PathSample(times, states, occ)


def _fd_step(x, fd_step):
    if fd_step is not None:
        return np.full(len(x), float(fd_step))
    return 1e-4 * (1.0 + np.linalg.norm(x, axis=1))


def _fd_derivatives(h: ScalarField, X, step):
    n, d = X.shape
    hs = step[:, None]
    h0 = h(X)
    grad = np.empty((n, d))
    hess = np.empty((n, d, d))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = 1.0
        fp, fm = h(X + hs * ei), h(X - hs * ei)
        grad[:, i] = (fp - fm) / (2 * step)
        hess[:, i, i] = (fp - 2 * h0 + fm) / step**2
        for j in range(i):
            ej = np.zeros(d)
            ej[j] = 1.0
            cross = h(X + hs * (ei + ej)) - h(X + hs * (ei - ej)) - h(X - hs * (ei - ej)) + h(X - hs * (ei + ej))
            hess[:, i, j] = hess[:, j, i] = cross / (4 * step**2)
    return grad, hess


def generator_apply(model: DiffusionModel, h: ScalarField, x, fd_step=None, t=0.0):
    """``Dh(x) = sum_i u_i d_i h + 1/2 sum_ij Sigma_ij d_ij h``.

    Uses the closed-form derivatives of ``h`` when present and central
    differences otherwise. Accepts one point (returns a float) or an
    ``(N, d)`` array (returns ``N`` values).
    """
    single = np.ndim(x) <= 1
    X = _points(x, model.d)
    if h.grad is not None and h.hess is not None:
        grad = np.asarray(h.grad(X), dtype=float).reshape(len(X), model.d)
        hess = np.asarray(h.hess(X), dtype=float).reshape(len(X), model.d, model.d)
    else:
        grad, hess = _fd_derivatives(h, X, _fd_step(X, fd_step))
    if not (np.all(np.isfinite(grad)) and np.all(np.isfinite(hess))):
        raise InvalidModelError("non-finite derivative estimate")
    out = np.einsum("ni,ni->n", model.u(X, t), grad) + 0.5 * np.einsum("nij,nij->n", model.sigma(X, t), hess)
    return float(out[0]) if single else out


def drift_condition_check(model: DiffusionModel, cert: DriftCertificate, grid, fd_step=None, tol=1e-6):
    """Margins ``DV + delta f - b 1_C`` at every grid point; the certificate passes
    on the grid when the largest margin is at most ``tol``."""
    X = _points(grid, model.d)
    if len(X) == 0:
        raise ValueError("grid is empty")
    DV = generator_apply(model, cert.V, X, fd_step)
    margins = DV + cert.delta * cert.f(X) - cert.b * cert.C.indicator(X)
    return MarginReport(np.asarray(margins, dtype=float), tol, points=X)


def _start(x0, model, m):
    return np.repeat(_points(x0, model.d), m, axis=0)


def mc_hitting_functional(model, f, C: RegionSet, r, x0, n_paths, dt, seed, T_cap=T_CAP) -> MCEstimate:
    """Estimate ``E_x0 int_0^{tau_C(r)} f(X_t) dt`` by Euler-Maruyama.

    The stopping time is the first grid time ``>= r`` at which the path is in
    ``C``; ``f`` is integrated with the left-endpoint rule. Paths still running
    at ``T_cap`` contribute their partial integral and are counted as censored.
    """
    if n_paths < 2:
        raise ValueError("need at least two paths")
    values = np.empty(n_paths)
    censored = 0
    max_steps = int(np.ceil(T_cap / dt))
    for start, stop, (rng, _) in path_blocks(seed, n_paths, streams=2):
        m = stop - start
        X = _start(x0, model, m)
        acc = np.zeros(m)
        active = np.ones(m, dtype=bool)
        for i in range(max_steps + 1):
            t = i * dt
            if t >= r - 1e-12:
                active &= ~C.contains(X)
            if not active.any():
                break
            if i == max_steps:
                censored += int(active.sum())
                break
            dB = rng.standard_normal((m, model.k)) * np.sqrt(dt)
            acc += np.where(active, f(X), 0.0) * dt
            X = np.where(active[:, None], _step(model, X, t, dt, dB), X)
            _check_finite(X, t + dt)
        values[start:stop] = acc
    if censored == n_paths:
        raise CensoredError(f"all {n_paths} paths censored at T_cap={T_cap}")
    return summarize(values, censored)


def mc_lyapunov(model, f, C: RegionSet, x0, n_paths, dt, seed, T_cap=T_CAP) -> MCEstimate:
    """Estimate ``E_x0 int_0^{tau~_C} f(X_t) dt`` with an independent Exp(1) clock.

    ``tau~_C`` is the time at which the occupation of ``C`` first reaches the
    clock. Brownian increments come from the same streams as
    :func:`mc_hitting_functional`, so the two estimators can be compared path
    by path for a shared seed.
    """
    if n_paths < 2:
        raise ValueError("need at least two paths")
    values = np.empty(n_paths)
    censored = 0
    max_steps = int(np.ceil(T_cap / dt))
    for start, stop, (rng, clock_rng) in path_blocks(seed, n_paths, streams=2):
        m = stop - start
        clock = clock_rng.exponential(1.0, m)
        X = _start(x0, model, m)
        acc = np.zeros(m)
        occ = np.zeros(m)
        active = np.ones(m, dtype=bool)
        for i in range(max_steps):
            t = i * dt
            inside = C.contains(X)
            rings = active & inside & (occ + dt >= clock)
            step = np.where(rings, clock - occ, dt)
            acc += np.where(active, f(X) * step, 0.0)
            occ += np.where(active & inside, step, 0.0)
            active &= ~rings
            if not active.any():
                break
            dB = rng.standard_normal((m, model.k)) * np.sqrt(dt)
            X = np.where(active[:, None], _step(model, X, t, dt, dB), X)
            _check_finite(X, t + dt)
        else:
            censored += int(active.sum())
        values[start:stop] = acc
    if censored == n_paths:
        raise CensoredError(f"all {n_paths} paths censored at T_cap={T_cap}")
    return summarize(values, censored)


def mc_lyapunov_integral(model, f, C: RegionSet, x0, n_paths, dt, seed, T_cap=T_CAP, cutoff=1e-10) -> MCEstimate:
    """Estimate ``E_x0 int_0^inf f(X_t) exp(-occupation_C(t)) dt``, truncated once the
    discount falls below ``cutoff`` or at ``T_cap``."""
    values = np.empty(n_paths)
    censored = 0
    max_steps = int(np.ceil(T_cap / dt))
    log_cut = np.log(cutoff)
    for start, stop, (rng, _) in path_blocks(seed, n_paths, streams=2):
        m = stop - start
        X = _start(x0, model, m)
        acc = np.zeros(m)
        occ = np.zeros(m)
        active = np.ones(m, dtype=bool)
        for i in range(max_steps):
            t = i * dt
            inside = C.contains(X)
            acc += np.where(active, f(X) * np.exp(-occ), 0.0) * dt
            occ += np.where(inside, dt, 0.0)
            active &= -occ > log_cut
            if not active.any():
                break
            dB = rng.standard_normal((m, model.k)) * np.sqrt(dt)
            X = np.where(active[:, None], _step(model, X, t, dt, dB), X)
            _check_finite(X, t + dt)
        else:
            censored += int(active.sum())
        values[start:stop] = acc
    return summarize(values, censored)


def mc_semigroup(model, f, x0, t_grid, n_paths, dt, seed) -> np.ndarray:
    """Monte Carlo ``E_x0 f(X_t)`` at each time of ``t_grid`` (rounded to the step grid)."""
    t_grid = np.asarray(t_grid, dtype=float)
    idx = np.rint(t_grid / dt).astype(int)
    sums = np.zeros(len(t_grid))
    for start, stop, (rng, _) in path_blocks(seed, n_paths, streams=2):
        m = stop - start
        X = _start(x0, model, m)
        for i in range(idx.max() + 1):
            hit = idx == i
            if hit.any():
                sums[hit] += f(X).sum()
            if i == idx.max():
                break
            dB = rng.standard_normal((m, model.k)) * np.sqrt(dt)
            X = _step(model, X, i * dt, dt, dB)
            _check_finite(X, (i + 1) * dt)
    return sums / n_paths


def ergodic_average(model, g, x0, T, dt, burn_in, seed, n_batches=None) -> MCEstimate:
    """Time average of ``g`` along one path over ``[burn_in, T]`` with batch-means error bars."""
    if not T > burn_in >= 0:
        raise ValueError("need T > burn_in >= 0")
    path = simulate_path(model, x0, dt, T, seed)
    keep = path.times[:-1] >= burn_in - 1e-12
    vals = g(path.states[:-1][keep])
    if not np.all(np.isfinite(vals)):
        raise InvalidModelError("g is non-finite along the path")
    return batch_means(vals, n_batches)
