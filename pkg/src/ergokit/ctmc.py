"""Exact computations for finite-state continuous-time Markov chains.

Every functional here is a matrix exponential or a dense linear solve:
semigroups, resolvents, hitting functionals, Lyapunov functions built from the
generalized resolvent, skeleton chains and weighted convergence curves.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.integrate import IntegrationWarning, quad, quad_vec
from scipy.sparse.csgraph import connected_components

from .certificates import DriftCertificate, MarginReport
from .errors import DimensionError, InvalidModelError, NotIrreducibleError, SingularSystemError
from .measures import (
    FiniteSet,
    FiniteSignedMeasure,
    as_finite_set,
    as_weight,
    f_norm_of_measure,
)

ROW_SUM_TOL = 1e-12
STOCHASTIC_TOL = 1e-10
IDENTITY_TOL = 1e-10
QUADRATURE_TOL = 1e-6


class SkeletonStepWarning(UserWarning):
    """A skeleton step below 1 was requested; the results remain exact."""


@dataclass(frozen=True)
class RateMatrix:
    q: np.ndarray
    labels: Optional[tuple] = None

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 1:
            raise DimensionError(f"rate matrix must be square and nonempty, got shape {q.shape}")
        if not np.all(np.isfinite(q)):
            raise InvalidModelError("rate matrix has non-finite entries")
        off = q - np.diag(np.diag(q))
        if np.any(off < 0):
            i, j = np.argwhere(off < 0)[0]
            raise InvalidModelError(f"negative off-diagonal rate q[{i},{j}] = {q[i, j]}")
        scale = max(1.0, float(np.max(np.abs(q))))
        rows = q.sum(axis=1)
        if np.any(np.abs(rows) > ROW_SUM_TOL * scale):
            i = int(np.argmax(np.abs(rows)))
            raise InvalidModelError(f"row {i} sums to {rows[i]!r}, expected 0")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != q.shape[0]:
                raise DimensionError("one label per state is required")

    @classmethod
    def from_rates(cls, rates, labels=None):
        """Build from off-diagonal rates; the diagonal is filled so rows sum to zero."""
        r = np.array(rates, dtype=float)
        np.fill_diagonal(r, 0.0)
        np.fill_diagonal(r, -r.sum(axis=1))
        return cls(r, labels)

    @property
    def n(self) -> int:
        return self.q.shape[0]


def as_rate_matrix(Q) -> RateMatrix:
    return Q if isinstance(Q, RateMatrix) else RateMatrix(Q)


@dataclass(frozen=True)
class TransitionKernel:
    p: np.ndarray
    horizon: float

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if np.any(p < -STOCHASTIC_TOL) or np.any(np.abs(p.sum(axis=1) - 1) > STOCHASTIC_TOL):
            raise InvalidModelError("kernel is not row-stochastic")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    def __matmul__(self, other):
        return self.p @ (other.p if isinstance(other, TransitionKernel) else other)


def _check_time(t, name="t"):
    if not np.isfinite(t) or t < 0:
        raise ValueError(f"{name} must be a finite nonnegative time, got {t}")


def _expm(q, t):
    return scipy.linalg.expm(t * q)


def transition_semigroup(Q, t: float) -> TransitionKernel:
    """``P^t = exp(tQ)``."""
    Q = as_rate_matrix(Q)
    _check_time(t)
    return TransitionKernel(_expm(Q.q, t), t)


def _reachable_to(adj: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """States from which some target state can be reached along positive rates."""
    reach = targets.copy()
    frontier = targets.copy()
    while frontier.any():
        new = adj[:, frontier].any(axis=1) & ~reach
        reach |= new
        frontier = new
    return reach


def _adjacency(q):
    adj = q > 0
    np.fill_diagonal(adj, False)
    return adj


@dataclass
class IrreducibilityReport:
    irreducible: bool
    n_classes: int
    classes: list
    aperiodic: bool
    psi: str
    message: str


def irreducibility_aperiodicity_check(Q) -> IrreducibilityReport:
    """Strong connectivity of the rate graph.

    An irreducible finite chain is psi-irreducible with psi the counting
    measure, and aperiodic since ``P^t > 0`` entrywise for every ``t > 0``.
    """
    Q = as_rate_matrix(Q)
    ncomp, labels = connected_components(_adjacency(Q.q), directed=True, connection="strong")
    classes = [np.flatnonzero(labels == c).tolist() for c in range(ncomp)]
    irreducible = ncomp == 1
    if irreducible:
        msg = (
            "rate graph is strongly connected: psi-irreducible with psi = counting measure; "
            "aperiodic because P^t(x, y) > 0 for all x, y and every t > 0"
        )
    else:
        msg = f"rate graph has {ncomp} strongly connected components; chain is reducible"
    return IrreducibilityReport(irreducible, ncomp, classes, irreducible, "counting", msg)


def _require_irreducible(Q: RateMatrix):
    rep = irreducibility_aperiodicity_check(Q)
    if not rep.irreducible:
        raise NotIrreducibleError(rep.message)


def stationary_distribution(Q) -> np.ndarray:
    """The unique ``pi`` with ``pi Q = 0`` and ``sum(pi) = 1``."""
    Q = as_rate_matrix(Q)
    _require_irreducible(Q)
    n = Q.n
    a = Q.q.T.copy()
    a[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    pi = np.linalg.solve(a, rhs)
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


def pi_f(Q, f) -> float:
    Q = as_rate_matrix(Q)
    return float(stationary_distribution(Q) @ as_weight(f, Q.n).table)


def resolvent(Q, alpha: float) -> np.ndarray:
    """``R_alpha = (alpha I - Q)^{-1} = int_0^inf exp(-alpha t) P^t dt``."""
    Q = as_rate_matrix(Q)
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    try:
        return np.linalg.inv(alpha * np.eye(Q.n) - Q.q)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - impossible for a valid Q
        raise SingularSystemError(f"alpha I - Q is singular for alpha={alpha}") from exc


def generalized_resolvent(Q, h) -> np.ndarray:
    """``R_h = (diag(h) - Q)^{-1}``, the resolvent killed at rate ``h``.

    The inverse exists iff every state can reach a state where ``h > 0``.
    """
    Q = as_rate_matrix(Q)
    h = np.asarray(h, dtype=float)
    if h.shape != (Q.n,):
        raise DimensionError(f"h must have {Q.n} entries, got shape {h.shape}")
    if np.any(h < 0):
        raise ValueError("h must be nonnegative")
    killed = _reachable_to(_adjacency(Q.q), h > 0)
    if not killed.all():
        bad = np.flatnonzero(~killed).tolist()
        raise SingularSystemError(f"h vanishes on a closed set of states containing {bad}")
    R = np.linalg.inv(np.diag(h) - Q.q)
    # M-matrix inverse: negative entries are pure rounding
    return np.clip(R, 0.0, None)


def verify_resolvent_equation(Q, g, h) -> float:
    """Max-norm residual of ``R_h = R_g + R_g I_{g-h} R_h`` for ``g >= h >= 0``."""
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    if g.shape != h.shape:
        raise DimensionError("g and h must have the same length")
    if np.any(g < h) or np.any(h < 0):
        raise ValueError("the resolvent equation requires g >= h >= 0")
    Rg = generalized_resolvent(Q, g)
    Rh = generalized_resolvent(Q, h)
    return float(np.max(np.abs(Rh - Rg - Rg @ np.diag(g - h) @ Rh)))


def generator_of_resolvent_check(Q, g) -> float:
    """Max-norm residual of ``Q(Rg) = Rg - g`` with ``R = R_1``."""
    Q = as_rate_matrix(Q)
    g = np.asarray(g, dtype=float)
    if g.shape != (Q.n,):
        raise DimensionError(f"g must have {Q.n} entries")
    if np.any(g < 0):
        raise ValueError("g must be nonnegative")
    gamma = resolvent(Q, 1.0) @ g
    return float(np.max(np.abs(Q.q @ gamma - (gamma - g))))


def integrated_semigroup(Q, f, t: float) -> np.ndarray:
    """``int_0^t P^s f ds`` from the exponential of the augmented generator ``[[Q, f], [0, 0]]``."""
    Q = as_rate_matrix(Q)
    f = np.asarray(f, dtype=float)
    n = Q.n
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = Q.q
    aug[:n, n] = f
    return _expm(aug, t)[:n, n]


def hitting_functional(Q, f, B, r: float = 0.0) -> np.ndarray:
    """``G_B(x, f; r) = E_x int_0^{tau_B(r)} f(Phi_t) dt`` with ``tau_B(r) = inf{t >= r : Phi_t in B}``."""
    Q = as_rate_matrix(Q)
    fv = as_weight(f, Q.n).table
    B = as_finite_set(B, Q.n)
    _check_time(r, "r")
    if len(B) == 0:
        raise ValueError("target set is empty")
    reach = _reachable_to(_adjacency(Q.q), B.mask)
    if not reach.all():
        bad = np.flatnonzero(~reach).tolist()
        raise SingularSystemError(f"target set unreachable from states {bad}")
    out = B.complement
    G = np.zeros(Q.n)
    if out.any():
        G[out] = np.linalg.solve(-Q.q[np.ix_(out, out)], fv[out])
    G = np.clip(G, 0.0, None)
    if r == 0:
        return G
    return integrated_semigroup(Q, fv, r) + _expm(Q.q, r) @ G


def lyapunov_from_resolvent(Q, f, C) -> DriftCertificate:
    """``V = R_{1_C} f`` with ``b = max_C V``; satisfies ``QV = -f + 1_C V`` exactly."""
    Q = as_rate_matrix(Q)
    w = as_weight(f, Q.n)
    C = as_finite_set(C, Q.n)
    if len(C) == 0:
        raise SingularSystemError("C is empty, so R_{1_C} does not exist")
    V = generalized_resolvent(Q, C.indicator) @ w.table
    b = float(V[C.mask].max())
    return DriftCertificate(V, w, C, b, 1.0)


def drift_identity_residual(Q, f, C) -> float:
    """Max-norm of ``Q V + f - 1_C V`` for ``V = R_{1_C} f``."""
    Q = as_rate_matrix(Q)
    cert = lyapunov_from_resolvent(Q, f, C)
    V = cert.V
    return float(np.max(np.abs(Q.q @ V + cert.f.table - cert.C.indicator * V)))


def validate_certificate(Q, cert: DriftCertificate, tol: float = 1e-9) -> MarginReport:
    """Margins ``QV + delta f - b 1_C``; NaN where ``V`` is infinite."""
    Q = as_rate_matrix(Q)
    V = np.asarray(cert.V, dtype=float)
    fv = as_weight(cert.f, Q.n).table
    C = as_finite_set(cert.C, Q.n)
    if V.shape != (Q.n,):
        raise DimensionError(f"V has shape {V.shape}, expected ({Q.n},)")
    finite = np.isfinite(V)
    leak = (Q.q[np.ix_(finite, ~finite)] > 0).any(axis=1)
    if leak.any():
        x = int(np.flatnonzero(finite)[np.argmax(leak)])
        raise InvalidModelError(f"state {x} has finite V but jumps at positive rate to a state with V = inf")
    margins = np.full(Q.n, np.nan)
    QV = Q.q[np.ix_(finite, finite)] @ V[finite]
    margins[finite] = QV + cert.delta * fv[finite] - cert.b * C.indicator[finite]
    return MarginReport(margins, tol)


def skeleton_kernel(Q, delta: float) -> TransitionKernel:
    """``P^Delta``; steps below 1 are allowed but flagged with a warning."""
    if not delta > 0:
        raise ValueError(f"skeleton step must be positive, got {delta}")
    if delta < 1:
        warnings.warn(f"skeleton step {delta} < 1", SkeletonStepWarning, stacklevel=2)
    return transition_semigroup(Q, delta)


def f_delta(Q, f, delta: float) -> np.ndarray:
    """``f_Delta(x) = int_0^Delta (P^t f)(x) dt``."""
    Q = as_rate_matrix(Q)
    if not delta > 0:
        raise ValueError(f"Delta must be positive, got {delta}")
    return integrated_semigroup(Q, as_weight(f, Q.n).table, delta)


def skeleton_hitting_sum(Q, delta: float, weights, B, first_index: int = 1) -> np.ndarray:
    """``E_x sum_{i=0}^{T} w(X(i))`` for the Delta-skeleton ``X``.

    ``T`` is the first index ``i >= first_index`` with ``X(i)`` in ``B``: the
    return time ``tau`` for ``first_index=1`` and the hitting time ``sigma``
    for ``first_index=0``.
    """
    Q = as_rate_matrix(Q)
    B = as_finite_set(B, Q.n)
    w = np.asarray(weights, dtype=float)
    if w.shape != (Q.n,):
        raise DimensionError(f"weights must have {Q.n} entries")
    if len(B) == 0:
        raise ValueError("target set is empty")
    if first_index not in (0, 1):
        raise ValueError("first_index must be 0 or 1")
    P = _expm(Q.q, delta)
    out = B.complement
    sub = P[np.ix_(out, out)]
    if sub.size and np.max(np.abs(np.linalg.eigvals(sub))) >= 1 - 1e-13:
        raise SingularSystemError("target set is not reachable by the skeleton chain")
    G = w.copy()
    if out.any():
        rhs = w[out] + P[np.ix_(out, B.mask)] @ w[B.mask]
        G[out] = np.linalg.solve(np.eye(out.sum()) - sub, rhs)
    if first_index == 1:
        G = w + P[:, out] @ G[out] + P[:, B.mask] @ w[B.mask]
    return G


def absorbed_hitting_probability(Q, C, t: float) -> np.ndarray:
    """``s(x) = P_x{tau_C <= t}`` via the semigroup of the chain stopped on ``C``."""
    Q = as_rate_matrix(Q)
    C = as_finite_set(C, Q.n)
    qa = Q.q.copy()
    qa[C.mask, :] = 0.0
    return np.clip(_expm(qa, t)[:, C.mask].sum(axis=1), 0.0, 1.0)


@dataclass
class SkeletonLyapunov:
    V_delta: np.ndarray
    b: float
    report: dict = field(default_factory=dict)


def construct_skeleton_lyapunov(Q, f, delta: float, C, k_max: int = 200, r_points: int = 41):
    """Lyapunov function for the Delta-skeleton from the continuous-time hitting functional.

    ``V_Delta = V0 + b0 * W`` where ``V0 = G_C(., f; 0)``,
    ``b0 = max_{y in C} G_C(y, f; Delta)``, ``s(x) = P_x{tau_C <= Delta}`` and
    ``W(x) = E_x sum_{i=0}^{sigma_C} s(X(i))`` summed up to the first skeleton
    index in ``C``. Then ``P^Delta V_Delta <= V_Delta - f_Delta + b 1_C`` with
    ``b = b0 (k0 + 1) / eps0``, where ``P^{k0 Delta}(x, C) >= eps0 s(x)``.
    """
    Q = as_rate_matrix(Q)
    w = as_weight(f, Q.n)
    C = as_finite_set(C, Q.n)
    _require_irreducible(Q)
    fd = f_delta(Q, w, delta)
    P = _expm(Q.q, delta)
    V0 = hitting_functional(Q, w, C, 0.0)
    G_delta = hitting_functional(Q, w, C, delta)
    b0 = float(G_delta[C.mask].max())
    s = absorbed_hitting_probability(Q, C, delta)

    r_grid = np.linspace(0.0, delta, r_points)
    k0, eps_grid = None, 0.0
    for k in range(1, k_max + 1):
        vals = [_expm(Q.q, k * delta - r)[np.ix_(C.mask, C.mask)].sum(axis=1).min() for r in r_grid]
        eps_grid = float(min(vals))
        if eps_grid > 0:
            k0 = k
            break
    if k0 is None:
        raise SingularSystemError(f"no k <= {k_max} gives a positive return probability to C")
    Pk_C = _expm(Q.q, k0 * delta)[:, C.mask].sum(axis=1)
    pos = s > 0
    eps0 = float(np.min(Pk_C[pos] / s[pos]))
    # step down past rounding so the minorization holds exactly in floating point
    while np.any(Pk_C - eps0 * s < 0):
        eps0 = float(np.nextafter(eps0, 0.0))
    return_margin = Pk_C - eps0 * s

    W = skeleton_hitting_sum(Q, delta, s, C, first_index=0)
    V_delta = V0 + b0 * W
    b = b0 * (k0 + 1) / eps0
    drift = P @ V_delta - V_delta + fd
    margins = drift - b * C.indicator
    V0_r1 = hitting_functional(Q, w, C, 1.0)
    report = {
        "V0": V0,
        "V0_r1": V0_r1,
        "f_delta": fd,
        "b0": b0,
        "s": s,
        "W": W,
        "W_bound": (k0 + 1) / eps0,
        "k0": k0,
        "eps0": eps0,
        "eps_grid": eps_grid,
        "return_margin": return_margin,
        "margins": margins,
        "b_tight": float(drift[C.mask].max()),
        "sup_diff_r0": float(np.max(np.abs(V_delta - V0))),
        "sup_diff_r1": float(np.max(np.abs(V_delta - V0_r1))),
        "step_below_one": delta < 1,
    }
    return SkeletonLyapunov(V_delta, b, report)


def fnorm_decay_curve(Q, f, x: int, t_grid: Sequence[float], check_monotone: bool = True):
    """``(t, ||P^t(x, .) - pi||_f)`` on a grid.

    The unweighted curve is non-increasing in ``t``; with ``check_monotone``
    a violation beyond rounding raises ``AssertionError``.
    """
    Q = as_rate_matrix(Q)
    fv = as_weight(f, Q.n).table
    pi = stationary_distribution(Q)
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid < 0):
        raise ValueError("times must be nonnegative")
    curve = []
    tv = []
    for t in t_grid:
        P = _expm(Q.q, t)
        curve.append((float(t), float(np.abs(P[x] - pi) @ fv)))
        tv.append(float(np.abs(P[x] - pi).sum()))
    if check_monotone:
        order = np.argsort(t_grid, kind="stable")
        diffs = np.diff(np.asarray(tv)[order])
        if np.any(diffs > 1e-12):
            raise AssertionError("total-variation error increased along the grid")
    return curve


def spectral_gap(Q) -> float:
    """``-Re(lambda_2)``, the decay rate of ``P^t`` towards ``pi``."""
    Q = as_rate_matrix(Q)
    if Q.n == 1:
        return np.inf
    ev = np.linalg.eigvals(Q.q)
    ev = ev[np.argsort(np.abs(ev))][1:]
    return float(-np.max(ev.real))


def _integrate_decay(fun, T, gap):
    """``int_0^T fun(t) dt`` for a vector-valued, exponentially decaying integrand."""
    pieces = max(1, int(np.ceil(T * gap / 2.0)))
    points = np.linspace(0.0, T, pieces + 1)
    total = 0.0
    err = 0.0
    for a, b in zip(points[:-1], points[1:]):
        val, e = quad_vec(fun, a, b, epsabs=1e-11, epsrel=1e-10, limit=400)
        total = total + val
        err += float(np.max(e))
    return total, err


@dataclass
class Theorem2Estimate:
    B_f0: float
    B_f: float
    pairs: list
    pair_integrals: np.ndarray
    pi_integrals: np.ndarray
    T_max: float
    gap: float
    tail_pairs: np.ndarray
    tail_pi: np.ndarray
    quad_error: float
    discrete_pair_sums: Optional[np.ndarray] = None
    discrete_pi_sums: Optional[np.ndarray] = None
    delta: Optional[float] = None


def _discrete_sums(Q, fd, pi, pairs, delta, gap, rtol=1e-13, k_max=100_000):
    """Truncated ``sum_k ||P^{k Delta}(x,.) - P^{k Delta}(y,.)||_{f_Delta}`` plus a geometric tail."""
    n = Q.n
    P_step = _expm(Q.q, delta)
    Pk = np.eye(n)
    xs = np.array([p[0] for p in pairs], dtype=int)
    ys = np.array([p[1] for p in pairs], dtype=int)
    pair_sum = np.zeros(len(pairs))
    pi_sum = np.zeros(n)
    first = None
    for _ in range(k_max):
        pair_term = np.abs(Pk[xs] - Pk[ys]) @ fd
        pi_term = np.abs(Pk - pi) @ fd
        pair_sum += pair_term
        pi_sum += pi_term
        size = max(pair_term.max(initial=0.0), pi_term.max())
        if first is None:
            first = max(size, 1e-300)
        if size <= rtol * first:
            break
        Pk = Pk @ P_step
    rho = np.exp(-gap * delta)
    tail = rho / (1 - rho) if rho < 1 else np.inf
    return pair_sum + tail * pair_term, pi_sum + tail * pi_term


def theorem2_bound(Q, f, V, T_max: Optional[float] = None, pairs=None, delta: Optional[float] = None):
    """Integrated weighted distances and their ratios to the Lyapunov function.

    ``B_f0 = max_{(x,y)} int_0^inf ||P^t(x,.) - P^t(y,.)||_f dt / (V(x) + V(y) + 1)``
    and ``B_f = max_x int_0^inf ||P^t(x,.) - pi||_f dt / (V(x) + 1)``. The
    integrals run to ``T_max`` by adaptive quadrature; the remainder is bounded
    by ``value(T_max) / gap``. With ``delta``, also returns the skeleton sums in
    the ``f_Delta`` norm.
    """
    Q = as_rate_matrix(Q)
    fv = as_weight(f, Q.n).table
    V = np.asarray(V, dtype=float)
    if V.shape != (Q.n,) or not np.all(np.isfinite(V)):
        raise ValueError("V must be finite at every state")
    pi = stationary_distribution(Q)
    gap = spectral_gap(Q)
    if T_max is None:
        T_max = 40.0 / gap if np.isfinite(gap) else 1.0
    if np.isfinite(gap) and gap * T_max < 5:
        raise ValueError(f"T_max={T_max} too short to resolve the spectral gap {gap:.3g}")
    if pairs is None:
        pairs = list(combinations(range(Q.n), 2))
    pairs = [(int(x), int(y)) for x, y in pairs]
    xs = np.array([p[0] for p in pairs], dtype=int)
    ys = np.array([p[1] for p in pairs], dtype=int)
    m = len(pairs)

    def integrand(t):
        P = _expm(Q.q, t)
        d_pairs = np.abs(P[xs] - P[ys]) @ fv if m else np.zeros(0)
        d_pi = np.abs(P - pi) @ fv
        return np.concatenate([d_pairs, d_pi])

    if np.isfinite(gap):
        total, err = _integrate_decay(integrand, T_max, gap)
        tail = integrand(T_max) / gap
    else:
        total, err = np.zeros(m + Q.n), 0.0
        tail = np.zeros(m + Q.n)
    ints = total + tail
    pair_int, pi_int = ints[:m], ints[m:]
    B_f0 = float(np.max(pair_int / (V[xs] + V[ys] + 1))) if m else 0.0
    B_f = float(np.max(pi_int / (V + 1)))
    est = Theorem2Estimate(
        B_f0, B_f, pairs, pair_int, pi_int, float(T_max), gap, tail[:m], tail[m:], err
    )
    if delta is not None:
        fd = f_delta(Q, fv, delta)
        if np.isfinite(gap):
            est.discrete_pair_sums, est.discrete_pi_sums = _discrete_sums(Q, fd, pi, pairs, delta, gap)
        else:
            est.discrete_pair_sums, est.discrete_pi_sums = np.zeros(m), np.abs(np.eye(Q.n) - pi) @ fd
        est.delta = float(delta)
    return est


@dataclass
class NormEquivalence:
    lhs: float
    rhs: float
    quad_error: float


def norm_equiv_check(Q, mu, f, delta: float) -> NormEquivalence:
    """``||mu||_{f_Delta}`` against ``int_0^Delta ||mu P^t||_f dt``; the first dominates."""
    Q = as_rate_matrix(Q)
    fv = as_weight(f, Q.n).table
    mu = mu if isinstance(mu, FiniteSignedMeasure) else FiniteSignedMeasure(mu)
    if mu.n != Q.n:
        raise DimensionError(f"measure has {mu.n} entries, chain has {Q.n}")
    # f_Delta is only bounded below by Delta, so it is not a weight in the strict sense
    lhs = float(np.abs(mu.mass) @ f_delta(Q, fv, delta))

    def curve(t):
        return f_norm_of_measure(mu.apply(_expm(Q.q, t)), fv)

    with warnings.catch_warnings():
        # kinks where mu P^t changes sign trip the roundoff heuristic; err is still reported
        warnings.simplefilter("ignore", IntegrationWarning)
        rhs, err = quad(curve, 0.0, delta, epsabs=1e-11, epsrel=1e-10, limit=200)
    return NormEquivalence(lhs, float(rhs), float(err))


@dataclass
class Minorization:
    eps: float
    nu: Optional[np.ndarray]
    T: float


def minorization_certificate(Q, C, T: float) -> Minorization:
    """Largest ``eps * nu`` with ``P^T(x, .) >= eps nu`` for every ``x`` in ``C``."""
    Q = as_rate_matrix(Q)
    C = as_finite_set(C, Q.n)
    if not T > 0:
        raise ValueError("T must be positive")
    if len(C) == 0:
        raise ValueError("C is empty")
    P = _expm(Q.q, T)
    raw = np.clip(P[C.mask].min(axis=0), 0.0, None)
    eps = float(raw.sum())
    if eps <= 0:
        return Minorization(0.0, None, T)
    return Minorization(eps, raw / eps, T)


@dataclass
class DominationReport:
    max_ratio: float
    worst_time: float
    worst_state: int
    beta: float

    @property
    def holds(self):
        return self.max_ratio <= 1.0


def exponential_domination_check(Q, f, beta: float, t_grid) -> DominationReport:
    """Max over the grid of ``(P^t f)(x) / (beta e^{beta t} f(x))``."""
    Q = as_rate_matrix(Q)
    fv = as_weight(f, Q.n).table
    if not beta > 0:
        raise ValueError("beta must be positive")
    best = (-np.inf, 0.0, 0)
    for t in np.asarray(t_grid, dtype=float):
        ratio = (_expm(Q.q, t) @ fv) / (beta * np.exp(beta * t) * fv)
        i = int(np.argmax(ratio))
        if ratio[i] > best[0]:
            best = (float(ratio[i]), float(t), i)
    return DominationReport(best[0], best[1], best[2], float(beta))
