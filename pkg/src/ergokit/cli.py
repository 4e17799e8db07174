"""Command-line front end.

``ergokit <subcommand> --config <path> --out <dir> [--seed <n>] [--quiet]``

Each subcommand writes ``<subcommand>.json`` (the report record) and one
``<subcommand>_<table>.csv`` per result table into the output directory.
Exit status: 0 when every check passes, 1 when a check fails, 2 for an
invalid config, 3 for a numerical failure (a partial report is still written).
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__, ctmc
from .analysis import (
    CERTIFICATE_TOL,
    IDENTITY_TOL,
    MC_SIGMAS,
    QUADRATURE_TOL,
    _Builder,
    _jsonable,
    diffusion_suite,
    digest,
    equivalence_suite,
    identity_suite,
    regularity_transfer_check,
    skeleton_suite,
    theorem2_suite,
)
from .certificates import DriftCertificate
from .config import ModelConfig, grid_points, load_config, time_grid
from .ctmc_paths import mc_ctmc_hitting, mc_ctmc_lyapunov
from .diffusion import drift_condition_check, mc_hitting_functional, mc_lyapunov
from .errors import ConfigError, ErgokitError
from .measures import FiniteSignedMeasure

log = logging.getLogger("ergokit")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


# ---------------------------------------------------------------- helpers

def _param(cfg: ModelConfig, key, default=None, kind=float):
    value = cfg.params.get(key, default)
    if value is None:
        return None
    try:
        if kind is int and (isinstance(value, bool) or float(value) != int(value)):
            raise ValueError
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"params.{key}", f"expected {kind.__name__}, got {value!r}") from None


def _require_ctmc(cfg, subcommand):
    if cfg.kind != "ctmc":
        raise ConfigError("model.kind", f"'{subcommand}' needs a ctmc model")


def _vector(cfg, key, default):
    value = cfg.params.get(key)
    if value is None:
        return default
    if not isinstance(value, list) or len(value) != cfg.n:
        raise ConfigError(f"params.{key}", f"expected a list of {cfg.n} numbers")
    try:
        return np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"params.{key}", "entries must be numbers") from None


def _state(cfg, key="x", default=0):
    x = _param(cfg, key, default, int)
    if not 0 <= x < cfg.n:
        raise ConfigError(f"params.{key}", f"state index must lie in 0..{cfg.n - 1}")
    return x


def _mc(cfg):
    mc = cfg.params.get("mc")
    if mc is None:
        return None
    if not isinstance(mc, dict):
        raise ConfigError("params.mc", "expected an object")
    return mc


def _seed(cfg):
    return _param(cfg, "seed", 0, int)


# ---------------------------------------------------------------- subcommands

def cmd_drift_check(cfg):
    if cfg.kind == "ctmc":
        if cfg.V is None:
            cert = ctmc.lyapunov_from_resolvent(cfg.model, cfg.f, cfg.C)
        else:
            if cfg.b is None:
                raise ConfigError("b", "required when V is given")
            cert = DriftCertificate(cfg.V, cfg.f, cfg.C, cfg.b, cfg.delta)
        tol = _param(cfg, "tolerance", CERTIFICATE_TOL)
        margins = ctmc.validate_certificate(cfg.model, cert, tol)
        b = _Builder("drift-check", {"Q": cfg.model, "f": cfg.f, "C": cfg.C, "V": cert.V, "b": cert.b})
        b.le("drift_margin_max", margins.max_margin, tol)
        b.constants.update(b=cert.b, worst_state=margins.worst_index)
        b.tables["margins"] = {"state": np.arange(cfg.n), "V": cert.V, "margin": margins.margins}
        return b.build()
    if cfg.V is None or cfg.b is None:
        raise ConfigError("V" if cfg.V is None else "b", "required for a diffusion drift check")
    grid = grid_points(cfg.params.get("grid", {"start": -10.0, "stop": 10.0, "step": 0.01}), cfg.d)
    cert = DriftCertificate(cfg.V, cfg.f, cfg.C, cfg.b, cfg.delta)
    tol = _param(cfg, "tolerance", 1e-6)
    margins = drift_condition_check(cfg.model, cert, grid, fd_step=_param(cfg, "fd_step"), tol=tol)
    b = _Builder("drift-check", {"model": cfg.raw["model"], "f": cfg.raw.get("f"), "V": cfg.raw.get("V"),
                                 "C": cfg.raw.get("C"), "b": cfg.b, "grid": grid})
    b.le("drift_margin_max", margins.max_margin, tol)
    b.constants.update(b=cfg.b, worst_point=margins.worst_point)
    b.provenance.update(grid_points=len(grid), sup_is_lower_bound=True)
    b.tables["margins"] = {f"x{i + 1}": grid[:, i] for i in range(cfg.d)} | {"margin": margins.margins}
    return b.build()


def cmd_resolvent_verify(cfg):
    _require_ctmc(cfg, "resolvent-verify")
    g = _vector(cfg, "g", np.full(cfg.n, 2.0))
    h = _vector(cfg, "h", cfg.C.indicator.astype(float))
    if np.any(h < 0) or np.any(g < h):
        raise ConfigError("params.g", "need g >= h >= 0 componentwise")
    return identity_suite(cfg.model, cfg.f, cfg.C, g, h)


def _mc_states(cfg, mc):
    states = mc.get("states", list(range(cfg.n)))
    if not isinstance(states, list) or not all(isinstance(s, int) and 0 <= s < cfg.n for s in states):
        raise ConfigError("params.mc.states", f"expected state indices in 0..{cfg.n - 1}")
    return states


def cmd_hitting(cfg):
    r = _param(cfg, "r", 0.0)
    if r < 0:
        raise ConfigError("params.r", "must be nonnegative")
    mc = _mc(cfg)
    if cfg.kind == "ctmc":
        G = ctmc.hitting_functional(cfg.model, cfg.f, cfg.C, r)
        b = _Builder("hitting", {"Q": cfg.model, "f": cfg.f, "C": cfg.C, "r": r, "mc": mc})
        b.finite("G_C_finite", float(G.max()))
        table = {"state": np.arange(cfg.n), "G": G}
        if mc:
            n_paths, seed = int(mc.get("n_paths", 10_000)), int(mc.get("seed", _seed(cfg)))
            est, se = [], []
            for x in _mc_states(cfg, mc):
                e = mc_ctmc_hitting(cfg.model, cfg.f, cfg.C, r, x, n_paths, seed + x)
                b.le(f"mc_z[{x}]", e.z_score(G[x]), MC_SIGMAS)
                est.append(e.estimate)
                se.append(e.std_error)
            b.tables["mc"] = {"state": _mc_states(cfg, mc), "estimate": est, "std_error": se}
            b.provenance.update(n_paths=n_paths, seed=seed)
        b.constants.update(r=r)
        b.tables["hitting"] = table
        return b.build()
    if not mc:
        raise ConfigError("params.mc", "required for a diffusion model")
    x0 = np.asarray(mc.get("x0", np.zeros(cfg.d)), dtype=float)
    n_paths, dt, seed = int(mc.get("n_paths", 2000)), float(mc.get("dt", 0.01)), int(mc.get("seed", _seed(cfg)))
    e = mc_hitting_functional(cfg.model, cfg.f, cfg.C, r, x0, n_paths, dt, seed)
    b = _Builder("hitting", {"model": cfg.raw["model"], "f": cfg.raw.get("f"), "C": cfg.raw.get("C"),
                             "r": r, "mc": mc})
    b.finite("G_C_estimate_finite", e.estimate)
    b.constants.update(estimate=e.estimate, std_error=e.std_error, censored=e.n_censored / n_paths, r=r)
    b.provenance.update(n_paths=n_paths, dt=dt, seed=seed, x0=x0)
    return b.build()


def cmd_lyapunov(cfg):
    mc = _mc(cfg)
    if cfg.kind == "ctmc":
        cert = ctmc.lyapunov_from_resolvent(cfg.model, cfg.f, cfg.C)
        b = _Builder("lyapunov", {"Q": cfg.model, "f": cfg.f, "C": cfg.C, "mc": mc})
        b.le("drift_identity_residual", ctmc.drift_identity_residual(cfg.model, cfg.f, cfg.C), IDENTITY_TOL)
        b.constants.update(b=cert.b)
        b.tables["lyapunov"] = {"state": np.arange(cfg.n), "V": cert.V}
        if mc:
            n_paths, seed = int(mc.get("n_paths", 10_000)), int(mc.get("seed", _seed(cfg)))
            est, se = [], []
            for x in _mc_states(cfg, mc):
                e = mc_ctmc_lyapunov(cfg.model, cfg.f, cfg.C, x, n_paths, seed + x)
                b.le(f"mc_z[{x}]", e.z_score(cert.V[x]), MC_SIGMAS)
                est.append(e.estimate)
                se.append(e.std_error)
            b.tables["mc"] = {"state": _mc_states(cfg, mc), "estimate": est, "std_error": se}
            b.provenance.update(n_paths=n_paths, seed=seed)
        return b.build()
    if not mc:
        raise ConfigError("params.mc", "required for a diffusion model")
    x0 = np.asarray(mc.get("x0", np.zeros(cfg.d)), dtype=float)
    n_paths, dt, seed = int(mc.get("n_paths", 2000)), float(mc.get("dt", 0.01)), int(mc.get("seed", _seed(cfg)))
    e = mc_lyapunov(cfg.model, cfg.f, cfg.C, x0, n_paths, dt, seed)
    b = _Builder("lyapunov", {"model": cfg.raw["model"], "f": cfg.raw.get("f"), "C": cfg.raw.get("C"), "mc": mc})
    b.finite("V_estimate_finite", e.estimate)
    b.constants.update(estimate=e.estimate, std_error=e.std_error, censored=e.n_censored / n_paths)
    b.provenance.update(n_paths=n_paths, dt=dt, seed=seed, x0=x0)
    return b.build()


def cmd_skeleton(cfg):
    _require_ctmc(cfg, "skeleton")
    return skeleton_suite(cfg.model, cfg.f, cfg.delta, cfg.C, T_max=_param(cfg, "T_max"))


def cmd_norm_check(cfg):
    _require_ctmc(cfg, "norm-check")
    pi = ctmc.stationary_distribution(cfg.model)
    default = -pi.copy()
    default[_state(cfg)] += 1.0
    mu = _vector(cfg, "mu", default)
    res = ctmc.norm_equiv_check(cfg.model, FiniteSignedMeasure(mu), cfg.f, cfg.delta)
    tol = _param(cfg, "tolerance", QUADRATURE_TOL)
    b = _Builder("norm-check", {"Q": cfg.model, "f": cfg.f, "mu": mu, "delta": cfg.delta})
    b.le("integral_excess", res.rhs - res.lhs, tol)
    if np.all(mu >= 0):
        b.le("nonnegative_gap", abs(res.lhs - res.rhs), tol)
    b.constants.update(f_delta_norm=res.lhs, integral=res.rhs, quad_error=res.quad_error)
    return b.build()


def cmd_decay(cfg):
    _require_ctmc(cfg, "decay")
    x = _state(cfg)
    ts = time_grid(cfg.params.get("t_grid"))
    curve = ctmc.fnorm_decay_curve(cfg.model, cfg.f, x, ts, check_monotone=False)
    unit = ctmc.fnorm_decay_curve(cfg.model, np.ones(cfg.n), x, ts, check_monotone=False)
    tv = np.array([v for _, v in unit])
    order = np.argsort(ts, kind="stable")
    b = _Builder("decay", {"Q": cfg.model, "f": cfg.f, "x": x, "t_grid": ts})
    b.le("tv_increase_max", float(np.max(np.diff(tv[order]), initial=0.0)), 1e-12)
    b.constants.update(x=x, gap=ctmc.spectral_gap(cfg.model))
    b.tables["curve"] = {"t": ts, "fnorm": [v for _, v in curve], "tv": tv}
    return b.build()


def cmd_theorem2(cfg):
    _require_ctmc(cfg, "theorem2")
    return theorem2_suite(cfg.model, cfg.f, cfg.C, T_max=_param(cfg, "T_max"), delta=cfg.delta)


def cmd_equivalence(cfg):
    _require_ctmc(cfg, "equivalence")
    r = _param(cfg, "r", 1.0)
    report = equivalence_suite(cfg.model, cfg.f, cfg.C, r=r)
    if not cfg.B:
        return report
    transfer = regularity_transfer_check(cfg.model, cfg.f, cfg.C, cfg.B, r, delta=cfg.delta)
    return [report, transfer]


def cmd_diffusion(cfg):
    if cfg.kind != "diffusion":
        raise ConfigError("model.kind", "'diffusion' needs a diffusion model")
    if cfg.V is None or cfg.b is None:
        raise ConfigError("V" if cfg.V is None else "b", "required for the diffusion suite")
    grid = grid_points(cfg.params.get("grid", {"start": -10.0, "stop": 10.0, "step": 0.01}), cfg.d)
    mc = _mc(cfg)
    if mc is not None:
        mc = dict(mc)
        mc.setdefault("seed", _seed(cfg))
    return diffusion_suite(cfg.model, cfg.f, cfg.V, cfg.C, cfg.b, grid, mc_params=mc, delta=cfg.delta)


SUBCOMMANDS = {
    "drift-check": cmd_drift_check,
    "resolvent-verify": cmd_resolvent_verify,
    "hitting": cmd_hitting,
    "lyapunov": cmd_lyapunov,
    "skeleton": cmd_skeleton,
    "norm-check": cmd_norm_check,
    "decay": cmd_decay,
    "theorem2": cmd_theorem2,
    "equivalence": cmd_equivalence,
    "diffusion": cmd_diffusion,
}


# ---------------------------------------------------------------- output

def write_atomic(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render_csv(columns: dict, config_digest: str) -> str:
    names = list(columns)
    cols = [list(np.asarray(columns[k]).tolist()) for k in names]
    if len({len(c) for c in cols}) > 1:
        raise ValueError("table columns differ in length")
    out = io.StringIO()
    out.write(f"# config_digest={config_digest} ergokit={__version__}\n")
    out.write(",".join(names) + "\n")
    for row in zip(*cols):
        out.write(",".join(_cell(v) for v in row) + "\n")
    return out.getvalue()


def _record(subcommand, config_digest, status, reports=(), error=None):
    rec = {
        "ergokit": __version__,
        "subcommand": subcommand,
        "config_digest": config_digest,
        "status": status,
        "reports": [r.to_dict() for r in reports],
    }
    if error is not None:
        rec["error"] = error
    return json.dumps(_jsonable(rec), sort_keys=True, indent=2) + "\n"


def _emit(out_dir, subcommand, config_digest, status, reports, error=None):
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [out_dir / f"{subcommand}.json"]
    write_atomic(written[0], _record(subcommand, config_digest, status, reports, error))
    for rep in reports:
        prefix = subcommand if rep.name == subcommand or len(reports) == 1 else f"{subcommand}_{rep.name}"
        for name, columns in sorted(rep.tables.items()):
            path = out_dir / f"{prefix}_{name}.csv"
            write_atomic(path, render_csv(columns, config_digest))
            written.append(path)
    return written


# ---------------------------------------------------------------- entry points

def run(subcommand, config_path, output_dir, seed=None) -> int:
    """Run one subcommand; returns the process exit status."""
    out_dir = Path(output_dir)
    try:
        cfg = load_config(config_path, seed=seed)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    config_digest = digest(cfg.raw)
    try:
        result = SUBCOMMANDS[subcommand](cfg)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (ErgokitError, ArithmeticError, np.linalg.LinAlgError, AssertionError, ValueError) as exc:
        message = f"{type(exc).__name__}: {exc}"
        log.error("numerical failure: %s", message)
        _emit(out_dir, subcommand, config_digest, "error", [], message)
        return EXIT_NUMERICAL
    reports = result if isinstance(result, list) else [result]
    ok = all(r.passed for r in reports)
    for path in _emit(out_dir, subcommand, config_digest, "passed" if ok else "failed", reports):
        log.info("wrote %s", path)
    for r in reports:
        for c in r.checks:
            log.info("%-40s %s  value=%r", c.name, "PASS" if c.passed else "FAIL", c.value)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _verbosity(quiet):
    if quiet:
        return logging.ERROR
    level = os.environ.get("ERGOKIT_VERBOSITY", "info").strip().lower()
    return {"quiet": logging.ERROR, "warning": logging.WARNING, "info": logging.INFO,
            "debug": logging.DEBUG}.get(level, logging.INFO)


def build_parser():
    parser = argparse.ArgumentParser(prog="ergokit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ergokit {__version__}")
    parser.add_argument("subcommand", choices=sorted(SUBCOMMANDS))
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override params.seed")
    parser.add_argument("--quiet", action="store_true", help="only report errors")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=_verbosity(args.quiet), format="%(message)s", stream=sys.stderr, force=True)
    return run(args.subcommand, args.config, args.out, seed=args.seed)


if __name__ == "__main__":
    sys.exit(main())
