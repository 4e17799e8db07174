"""Cross-module experiments assembled into checkable reports.

Each suite returns an :class:`ExperimentReport` whose checks store the raw
value, the tolerance and the comparison, so a verdict can be recomputed from
the serialized record alone.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import ctmc
from .certificates import DriftCertificate
from .diffusion import (
    drift_condition_check,
    ergodic_average,
    mc_lyapunov,
    mc_lyapunov_integral,
    mc_semigroup,
)
from .measures import FiniteSet, as_finite_set, as_weight

IDENTITY_TOL = 1e-10
CERTIFICATE_TOL = 1e-9
QUADRATURE_TOL = 1e-6
MC_SIGMAS = 3.0


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: Optional[float]
    relation: str  # "le": value <= tolerance, "ge": value >= tolerance, "finite"

    @property
    def passed(self) -> bool:
        if self.relation == "finite":
            return math.isfinite(self.value)
        if math.isnan(self.value):
            return False
        if self.relation == "le":
            return self.value <= self.tolerance
        if self.relation == "ge":
            return self.value >= self.tolerance
        raise ValueError(f"unknown relation {self.relation!r}")

    def to_dict(self):
        return {
            "name": self.name,
            "value": _jsonable(self.value),
            "tolerance": _jsonable(self.tolerance),
            "relation": self.relation,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class ExperimentReport:
    name: str
    inputs_digest: str
    checks: tuple
    constants: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self):
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self):
        return {
            "experiment": self.name,
            "inputs_digest": self.inputs_digest,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "constants": _jsonable(self.constants),
            "provenance": _jsonable(self.provenance),
        }


class _Builder:
    def __init__(self, name, inputs):
        self.name = name
        self.digest = digest(inputs)
        self.checks = []
        self.constants = {}
        self.provenance = {}
        self.tables = {}

    def le(self, name, value, tol):
        self.checks.append(Check(name, float(value), float(tol), "le"))

    def ge(self, name, value, tol):
        self.checks.append(Check(name, float(value), float(tol), "ge"))

    def finite(self, name, value):
        self.checks.append(Check(name, float(value), None, "finite"))

    def build(self) -> ExperimentReport:
        checks = tuple(sorted(self.checks, key=lambda c: c.name))
        return ExperimentReport(self.name, self.digest, checks, dict(self.constants),
                                dict(self.provenance), dict(self.tables))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return obj


def digest(obj) -> str:
    """SHA-256 of the canonical JSON form of ``obj`` (arrays become lists)."""
    text = json.dumps(_jsonable(_plain(obj)), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _plain(obj):
    if isinstance(obj, ctmc.RateMatrix):
        return obj.q
    if isinstance(obj, FiniteSet):
        return {"n": obj.n, "indices": list(obj.indices)}
    if hasattr(obj, "is_table"):
        return obj.table if obj.is_table else repr(obj)
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def random_instance(rng, n, sparsity=0.3, f_max=5.0):
    """A random irreducible rate matrix with weight ``f`` in ``[1, f_max]`` and a nonempty ``C``.

    Rates are uniform on ``(0, 2)``, a fraction ``sparsity`` of them are zeroed,
    and the cycle ``0 -> 1 -> ... -> n-1 -> 0`` is kept positive.
    """
    rates = rng.uniform(0.05, 2.0, size=(n, n))
    rates[rng.random((n, n)) < sparsity] = 0.0
    for i in range(n):
        rates[i, (i + 1) % n] = max(rates[i, (i + 1) % n], rng.uniform(0.2, 2.0)) if n > 1 else 0.0
    Q = ctmc.RateMatrix.from_rates(rates)
    f = rng.uniform(1.0, f_max, size=n)
    size = int(rng.integers(1, n + 1))
    C = FiniteSet(rng.choice(n, size=size, replace=False), n)
    return Q, f, C


def identity_suite(Q, f, C, g, h) -> ExperimentReport:
    """Resolvent equation, generator-of-resolvent and drift identities on one instance."""
    Q = ctmc.as_rate_matrix(Q)
    b = _Builder("identities", {"Q": Q, "f": f, "C": as_finite_set(C, Q.n), "g": g, "h": h})
    b.le("resolvent_equation_residual", ctmc.verify_resolvent_equation(Q, g, h), IDENTITY_TOL)
    b.le("generator_of_resolvent_residual", ctmc.generator_of_resolvent_check(Q, g), IDENTITY_TOL)
    b.le("drift_identity_residual", ctmc.drift_identity_residual(Q, f, C), IDENTITY_TOL)
    return b.build()


def equivalence_suite(Q, f, C, r=1.0) -> ExperimentReport:
    """Integrability of ``f`` under ``pi``, self-regularity of ``C`` and the converse
    Lyapunov function, evaluated on one finite chain."""
    Q = ctmc.as_rate_matrix(Q)
    w = as_weight(f, Q.n)
    C = as_finite_set(C, Q.n)
    b = _Builder("equivalence", {"Q": Q, "f": w, "C": C, "r": r})
    rep = ctmc.irreducibility_aperiodicity_check(Q)
    b.le("irreducible_classes", rep.n_classes, 1)

    pi = ctmc.stationary_distribution(Q)
    pif = float(pi @ w.table)
    b.finite("pi_f_finite", pif)

    G_r = ctmc.hitting_functional(Q, w, C, r)
    sup_C = float(G_r[C.mask].max())
    b.finite("self_regularity_sup_C", sup_C)

    cert = ctmc.lyapunov_from_resolvent(Q, w, C)
    margins = ctmc.validate_certificate(Q, cert, CERTIFICATE_TOL)
    b.le("drift_margin_max", margins.max_margin, CERTIFICATE_TOL)
    b.le("drift_identity_residual", ctmc.drift_identity_residual(Q, w, C), IDENTITY_TOL)

    b_f = float(np.max(G_r / (cert.V + 1)))
    b.finite("b_f_finite", b_f)
    b.le("regularity_bound_violation", float(np.max(G_r - b_f * (cert.V + 1))), IDENTITY_TOL)

    S_V = np.isfinite(cert.V)
    b.le("pi_S_V_deficit", abs(1.0 - float(pi[S_V].sum())), 1e-12)
    P1 = ctmc.transition_semigroup(Q, 1.0).p
    b.le("S_V_absorbing_leak", float(np.max(1.0 - P1[np.ix_(S_V, S_V)].sum(axis=1))), IDENTITY_TOL)

    b.constants.update(pi_f=pif, sup_C_G_C=sup_C, b=cert.b, b_f=b_f, r=r)
    b.tables["lyapunov"] = {"state": np.arange(Q.n), "V": cert.V, "G_C_r": G_r, "margin": margins.margins, "pi": pi}
    return b.build()


def regularity_transfer_check(Q, f, C, B_list, r, r0=1.0, r_grid=None, delta=1.0) -> ExperimentReport:
    """Growth of ``G_C(x, f; r)`` in ``r`` and transfer of finiteness from ``C`` to other targets.

    ``b_C`` is the largest slope ``(G_C(x,f;r') - G_C(x,f;r0)) / r'`` over the
    grid; ``c_B = max_x (G^Delta_B(x, f_Delta) - G_C(x, f))`` for each target.
    """
    Q = ctmc.as_rate_matrix(Q)
    w = as_weight(f, Q.n)
    C = as_finite_set(C, Q.n)
    B_sets = [as_finite_set(B, Q.n) for B in B_list]
    if r_grid is None:
        r_grid = np.linspace(0.0, max(4.0 * r0, r, 1.0), 33)
    r_grid = np.unique(np.append(np.asarray(r_grid, dtype=float), r))
    b = _Builder("regularity_transfer", {"Q": Q, "f": w, "C": C, "B": B_sets, "r": r, "r0": r0,
                                         "r_grid": r_grid, "delta": delta})
    G0 = ctmc.hitting_functional(Q, w, C, r0)
    b.finite("G_C_r0_finite", float(G0.max()))
    slopes = [np.max((ctmc.hitting_functional(Q, w, C, s) - G0) / s) for s in r_grid if s > 0]
    b_C = max(0.0, float(max(slopes)))
    b.finite("b_C_finite", b_C)
    G_r = ctmc.hitting_functional(Q, w, C, r)
    b.le("growth_bound_violation", float(np.max(G_r - G0 - b_C * r)), IDENTITY_TOL)

    G_C0 = ctmc.hitting_functional(Q, w, C, 0.0)
    fd = ctmc.f_delta(Q, w, delta)
    c_B = {}
    for B in B_sets:
        key = ",".join(str(i) for i in B.indices)
        GB = ctmc.hitting_functional(Q, w, B, r)
        b.finite(f"G_B_finite[{key}]", float(GB.max()))
        skel = ctmc.skeleton_hitting_sum(Q, delta, fd, B)
        c_B[key] = float(np.max(skel - G_C0))
        b.finite(f"c_B_finite[{key}]", c_B[key])
    b.constants.update(b_C=b_C, c_B=c_B, r=r, r0=r0, slack_at_r=b_C * r)
    b.provenance.update(r_grid=r_grid, delta=delta)
    return b.build()


def skeleton_suite(Q, f, delta, C, T_max=None) -> ExperimentReport:
    """Skeleton Lyapunov construction, its minorization constants, and the skeleton
    sums against the continuous-time integrals."""
    Q = ctmc.as_rate_matrix(Q)
    w = as_weight(f, Q.n)
    C = as_finite_set(C, Q.n)
    b = _Builder("skeleton", {"Q": Q, "f": w, "C": C, "delta": delta, "T_max": T_max})
    sk = ctmc.construct_skeleton_lyapunov(Q, w, delta, C)
    rep = sk.report
    b.le("skeleton_drift_margin_max", float(rep["margins"].max()), CERTIFICATE_TOL)
    b.ge("return_minorization_margin_min", float(rep["return_margin"].min()), 0.0)
    b.ge("eps0_positive", rep["eps0"], np.finfo(float).tiny)
    b.le("W_bound_excess", float(rep["W"].max() - rep["W_bound"]), 1e-9)
    b.finite("sup_V_delta_minus_G_C", rep["sup_diff_r0"])
    b.finite("sup_V_delta_minus_G_C_r1", rep["sup_diff_r1"])
    b.le("f_delta_below_delta", float(delta - rep["f_delta"].min()), 1e-12)

    V = ctmc.lyapunov_from_resolvent(Q, w, C).V
    est = ctmc.theorem2_bound(Q, w, V, T_max=T_max, delta=delta)
    tol = QUADRATURE_TOL
    if len(est.pairs):
        b.le("pair_integral_minus_skeleton_sum", float(np.max(est.pair_integrals - est.discrete_pair_sums)), tol)
    b.le("pi_integral_minus_skeleton_sum", float(np.max(est.pi_integrals - est.discrete_pi_sums)), tol)
    b.finite("B_f0_finite", est.B_f0)
    b.finite("B_f_finite", est.B_f)
    xs = np.array([p[0] for p in est.pairs], dtype=int)
    ys = np.array([p[1] for p in est.pairs], dtype=int)
    M_f0 = float(np.max(est.discrete_pair_sums / (V[xs] + V[ys] + 1))) if len(est.pairs) else 0.0
    M_f = float(np.max(est.discrete_pi_sums / (V + 1)))
    b.finite("M_f0_finite", M_f0)
    b.finite("M_f_finite", M_f)

    b.constants.update(
        b0=rep["b0"], eps0=rep["eps0"], k0=rep["k0"], b=sk.b, b_tight=rep["b_tight"],
        sup_V_delta_minus_G_C=rep["sup_diff_r0"], sup_V_delta_minus_G_C_r1=rep["sup_diff_r1"],
        B_f0=est.B_f0, B_f=est.B_f, M_f0=M_f0, M_f=M_f,
    )
    b.provenance.update(delta=delta, T_max=est.T_max, gap=est.gap, quad_error=est.quad_error,
                        step_below_one=rep["step_below_one"])
    b.tables["skeleton"] = {
        "state": np.arange(Q.n), "V_delta": sk.V_delta, "V0": rep["V0"], "f_delta": rep["f_delta"],
        "s": rep["s"], "margin": rep["margins"],
    }
    return b.build()


def theorem2_suite(Q, f, C, T_max=None, delta=1.0) -> ExperimentReport:
    Q = ctmc.as_rate_matrix(Q)
    w = as_weight(f, Q.n)
    C = as_finite_set(C, Q.n)
    b = _Builder("theorem2", {"Q": Q, "f": w, "C": C, "T_max": T_max, "delta": delta})
    V = ctmc.lyapunov_from_resolvent(Q, w, C).V
    est = ctmc.theorem2_bound(Q, w, V, T_max=T_max, delta=delta)
    b.finite("B_f0_finite", est.B_f0)
    b.finite("B_f_finite", est.B_f)
    if len(est.pairs):
        b.le("pair_integral_minus_skeleton_sum", float(np.max(est.pair_integrals - est.discrete_pair_sums)), QUADRATURE_TOL)
    b.le("pi_integral_minus_skeleton_sum", float(np.max(est.pi_integrals - est.discrete_pi_sums)), QUADRATURE_TOL)
    b.constants.update(B_f0=est.B_f0, B_f=est.B_f)
    b.provenance.update(T_max=est.T_max, gap=est.gap, quad_error=est.quad_error, delta=delta)
    b.tables["pi_integrals"] = {"state": np.arange(Q.n), "V": V, "integral": est.pi_integrals,
                                "skeleton_sum": est.discrete_pi_sums}
    if len(est.pairs):
        b.tables["pair_integrals"] = {
            "x": [p[0] for p in est.pairs], "y": [p[1] for p in est.pairs],
            "integral": est.pair_integrals, "skeleton_sum": est.discrete_pair_sums,
        }
    return b.build()


def diffusion_suite(model, f, V, C, b_const, grid, mc_params=None, delta=1.0) -> ExperimentReport:
    """Drift certificate on a grid plus Monte Carlo consistency checks.

    ``mc_params`` keys: ``x0``, ``n_paths``, ``dt``, ``seed``, and optionally
    ``T``/``burn_in``/``reference`` for the ergodic average of ``f``, and
    ``beta``/``t_grid`` for sampled exponential domination of ``f``.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[0] == 1 and model.d == 1:
        grid = grid.T
    mc = dict(mc_params or {})
    b = _Builder("diffusion", {"model": model.name, "f": getattr(f, "name", ""), "V": getattr(V, "name", ""),
                               "C": getattr(C, "description", ""), "b": b_const, "grid": grid, "mc": mc})
    cert = DriftCertificate(V, f, C, b_const, delta)
    margins = drift_condition_check(model, cert, grid)
    b.le("drift_margin_max", margins.max_margin, margins.tolerance)
    b.constants.update(worst_point=margins.worst_point, max_margin=margins.max_margin)
    b.provenance.update(grid_min=grid.min(axis=0), grid_max=grid.max(axis=0), grid_points=len(grid),
                        sup_is_lower_bound=True)
    b.tables["margins"] = {f"x{i + 1}": grid[:, i] for i in range(model.d)} | {"margin": margins.margins}

    if mc:
        x0 = np.asarray(mc.get("x0", np.zeros(model.d)), dtype=float)
        n_paths, dt, seed = int(mc.get("n_paths", 2000)), float(mc.get("dt", 0.01)), int(mc.get("seed", 0))
        clock = mc_lyapunov(model, f, C, x0, n_paths, dt, seed)
        integral = mc_lyapunov_integral(model, f, C, x0, n_paths, dt, seed + 1)
        se = math.hypot(clock.std_error, integral.std_error)
        b.le("lyapunov_estimators_z", abs(clock.estimate - integral.estimate) / se if se > 0 else 0.0, MC_SIGMAS)
        b.constants.update(V_clock=clock.estimate, V_clock_se=clock.std_error,
                           V_integral=integral.estimate, V_integral_se=integral.std_error,
                           censored_clock=clock.n_censored / n_paths,
                           censored_integral=integral.n_censored / n_paths)
        if "T" in mc:
            avg = ergodic_average(model, f, x0, float(mc["T"]), dt, float(mc.get("burn_in", 0.0)), seed + 2)
            b.constants.update(pi_f=avg.estimate, pi_f_se=avg.std_error)
            if mc.get("reference") is not None:
                b.le("ergodic_average_z", avg.z_score(float(mc["reference"])), MC_SIGMAS)
        if "beta" in mc:
            beta = float(mc["beta"])
            t_grid = np.asarray(mc.get("t_grid", np.linspace(0.0, 2.0, 11)), dtype=float)
            Ef = mc_semigroup(model, f, x0, t_grid, n_paths, dt, seed + 3)
            ratio = Ef / (beta * np.exp(beta * t_grid) * f(x0[None, :])[0])
            # evidence for the sufficient condition only, never a verdict
            b.constants.update(domination_max_ratio=float(ratio.max()), domination_beta=beta)
        b.provenance.update(seed=seed, n_paths=n_paths, dt=dt, x0=x0)
    return b.build()
