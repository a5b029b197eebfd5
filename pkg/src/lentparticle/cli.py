"""Config-driven command-line front end.

Subcommands::

    lentparticle simulate   --config run.ini --out dir [--seed N]
    lentparticle gamma      --config run.ini --out dir [--seed N] [--threads N]
    lentparticle rank-stats --config run.ini --out dir [--seed N] [--threads N]
    lentparticle example NAME --out dir --seed N [--config run.ini]

The config file is INI-style with typed sections ([run], [model], [numeric],
[gamma], [structure], [coefficients]).  A run-manifest JSON produced by any
command can be passed back as ``--config``: it carries the full config echo,
so reruns are byte-identical.  No command reads the clock; all randomness
descends from the seed.

Exit codes: 0 success, 1 runtime or numeric failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bottom_structure import (
    BottomStructure,
    from_expressions,
    standard_instances,
)
from .density_criteria import monte_carlo_rank_stats, rank_diagnostic
from .errors import ConfigFileError, InputError, LentParticleError
from .expressions import compile_coefficient
from .lent_particle import (
    GammaMatrix,
    SdeFunctional,
    gamma_flow,
    gamma_flow_left,
    gamma_generic,
    gamma_rho_mc,
)
from .poisson_measure import TruncatedLevyModel, simulate_configuration
from .scenarios import (
    DoleansPairFunctional,
    Scenario,
    doleans_dade,
    get_scenario,
    levy_area,
    mckean_vlasov,
    power_law_first_moment,
    power_law_model,
    stable_like_coefficient,
    stable_like_generator_check,
    stable_like_pushforward_check,
    uniform_box_model,
    zeta,
)
from .sde_engine import CoefficientSet, write_trajectory_csv

__all__ = ["main", "build_parser"]

_EXAMPLE_NAMES = ("doleans", "levy-area-1", "levy-area-2", "mckean", "stable-like")
_GAMMA_TAGS = ("theorem9", "remark3", "generic", "rho_mc")

# section -> keys accepted there (xi_N / c_N handled by prefix)
_KNOWN_KEYS = {
    "run": {"scenario", "seed", "threads"},
    "model": {
        "kind", "truncation", "alpha", "bound", "asymmetry",
        "angular_coefficient", "halfwidth", "intensity",
    },
    "numeric": {
        "step", "horizon", "eval_time", "draws", "n_paths",
        "epsilons", "rank_tolerance",
    },
    "gamma": {"formula", "include_terms"},
    "structure": {"name", "k", "psi"},
    "coefficients": {"state_dim", "x0"},
}

# which [model] keys each named scenario understands
_SCENARIO_MODEL_KEYS = {
    "doleans": {"truncation", "alpha", "bound", "asymmetry"},
    "levy-area-1": {"truncation", "angular_coefficient"},
    "levy-area-2": {"truncation", "alpha", "bound", "asymmetry"},
    "null": {"truncation"},
}


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def _load_config(path: str | None) -> dict[str, dict[str, str]]:
    """Parse an INI config or recover the echo from a manifest JSON."""
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigFileError(f"config file not found: {path}")
    text = p.read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        try:
            manifest = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigFileError(f"config file is neither INI nor JSON: {exc}") from exc
        cfg = manifest.get("config")
        if not isinstance(cfg, dict):
            raise ConfigFileError("manifest JSON lacks a 'config' object")
        out: dict[str, dict[str, str]] = {}
        for sec, keys in cfg.items():
            if not isinstance(keys, dict):
                raise ConfigFileError(f"{sec}: manifest config sections must be objects")
            out[sec] = {str(k): str(v) for k, v in keys.items()}
        if "seed" in manifest and "seed" not in out.get("run", {}):
            out.setdefault("run", {})["seed"] = str(manifest["seed"])
        return out
    import configparser

    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        raise ConfigFileError(f"could not parse {path}: {exc}") from exc
    return {sec: dict(parser.items(sec)) for sec in parser.sections()}


def _check_known_keys(cfg: dict[str, dict[str, str]]) -> None:
    for sec, keys in cfg.items():
        if sec not in _KNOWN_KEYS:
            raise ConfigFileError(f"unknown config section [{sec}]")
        for key in keys:
            if key in _KNOWN_KEYS[sec]:
                continue
            if sec == "structure" and key.startswith("xi_") and key[3:].isdigit():
                continue
            if sec == "coefficients" and key.startswith("c_") and key[2:].isdigit():
                continue
            raise ConfigFileError(f"{sec}.{key}: unknown key")


def _get(cfg, section, key, default=None):
    return cfg.get(section, {}).get(key, default)


def _get_float(cfg, section, key, default=None, positive=False, nonnegative=False):
    raw = _get(cfg, section, key)
    if raw is None:
        if default is None:
            raise ConfigFileError(f"{section}.{key}: required")
        return default
    try:
        val = float(raw)
    except ValueError:
        raise ConfigFileError(f"{section}.{key}: not a number: {raw!r}") from None
    if not math.isfinite(val):
        raise ConfigFileError(f"{section}.{key}: must be finite")
    if positive and not val > 0.0:
        raise ConfigFileError(f"{section}.{key}: must be > 0, got {raw}")
    if nonnegative and val < 0.0:
        raise ConfigFileError(f"{section}.{key}: must be >= 0, got {raw}")
    return val


def _get_int(cfg, section, key, default=None, minimum=None):
    raw = _get(cfg, section, key)
    if raw is None:
        if default is None:
            raise ConfigFileError(f"{section}.{key}: required")
        return default
    try:
        val = int(raw)
    except ValueError:
        raise ConfigFileError(f"{section}.{key}: not an integer: {raw!r}") from None
    if minimum is not None and val < minimum:
        raise ConfigFileError(f"{section}.{key}: must be >= {minimum}, got {val}")
    return val


def _get_bool(cfg, section, key, default=False):
    raw = _get(cfg, section, key)
    if raw is None:
        return default
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigFileError(f"{section}.{key}: not a boolean: {raw!r}")


def _get_float_list(cfg, section, key):
    raw = _get(cfg, section, key)
    if raw is None or not raw.strip():
        return []
    out = []
    for tok in raw.replace(",", " ").split():
        try:
            out.append(float(tok))
        except ValueError:
            raise ConfigFileError(f"{section}.{key}: not a number: {tok!r}") from None
    return out


def _resolve_seed(args, cfg) -> int:
    if args.seed is not None:
        return int(args.seed)
    raw = _get(cfg, "run", "seed")
    if raw is None:
        raise ConfigFileError("run.seed: required (pass --seed or set it in the config)")
    try:
        return int(raw)
    except ValueError:
        raise ConfigFileError(f"run.seed: not an integer: {raw!r}") from None


def _resolve_threads(args, cfg) -> int:
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigFileError("threads: must be >= 1")
        return int(args.threads)
    return _get_int(cfg, "run", "threads", default=1, minimum=1)


# ---------------------------------------------------------------------------
# scenario construction
# ---------------------------------------------------------------------------

def _numeric_overrides(cfg) -> dict:
    out = {}
    step = _get(cfg, "numeric", "step")
    if step is not None:
        out["step"] = _get_float(cfg, "numeric", "step", positive=True)
    horizon = _get(cfg, "numeric", "horizon")
    if horizon is not None:
        out["horizon"] = _get_float(cfg, "numeric", "horizon", positive=True)
    ev = _get(cfg, "numeric", "eval_time")
    if ev is not None:
        out["eval_time"] = _get_float(cfg, "numeric", "eval_time", positive=True)
    return out


def _named_scenario(name: str, cfg) -> Scenario:
    allowed = _SCENARIO_MODEL_KEYS[name]
    overrides: dict = {}
    for key, raw in cfg.get("model", {}).items():
        if key == "kind":
            raise ConfigFileError("model.kind: only meaningful for scenario = custom")
        if key not in allowed:
            raise ConfigFileError(f"model.{key}: not accepted by scenario {name!r}")
        overrides[key] = _get_float(cfg, "model", key)
    overrides.update(_numeric_overrides(cfg))
    if "truncation" in overrides and overrides["truncation"] <= 0:
        raise ConfigFileError("model.truncation: must be > 0")
    try:
        return get_scenario(name, **overrides)
    except InputError as exc:
        raise ConfigFileError(str(exc)) from exc


def _custom_model(cfg) -> TruncatedLevyModel:
    kind = _get(cfg, "model", "kind", "uniform")
    if kind == "uniform":
        return uniform_box_model(
            1,
            halfwidth=_get_float(cfg, "model", "halfwidth", 1.0, positive=True),
            truncation=_get_float(cfg, "model", "truncation", 0.05, nonnegative=True),
            intensity=_get_float(cfg, "model", "intensity", 1.0, positive=True),
        )
    if kind == "power-law":
        return power_law_model(
            _get_float(cfg, "model", "truncation", 0.05, positive=True),
            alpha=_get_float(cfg, "model", "alpha", 1.0, positive=True),
            bound=_get_float(cfg, "model", "bound", 0.5, positive=True),
            asymmetry=_get_float(cfg, "model", "asymmetry", 0.0),
        )
    raise ConfigFileError(f"model.kind: unknown kind {kind!r}")


def _custom_structure(cfg, r: int) -> BottomStructure:
    sec = cfg.get("structure", {})
    name = sec.get("name")
    if name is not None:
        catalog = standard_instances()
        if name not in catalog:
            raise ConfigFileError(
                f"structure.name: unknown {name!r}; available: {', '.join(sorted(catalog))}"
            )
        bs = catalog[name]
        if bs.mark_dimension != r:
            raise ConfigFileError(
                f"structure.name: {name} has mark dimension {bs.mark_dimension}, model has {r}"
            )
        return bs
    if "k" in sec or "psi" in sec or any(k.startswith("xi_") for k in sec):
        diag = []
        for i in range(1, r + 1):
            src = sec.get(f"xi_{i}")
            if src is None:
                raise ConfigFileError(f"structure.xi_{i}: required for a custom structure")
            diag.append(src)
        try:
            return from_expressions(sec.get("k", "1"), sec.get("psi", sec.get("k", "1")), diag, r)
        except InputError as exc:
            raise ConfigFileError(f"structure: {exc}") from exc
    return standard_instances()["PSI_OVER_K"] if r == 1 else standard_instances()["ISOTROPIC_RD"]


def _fd_jacobian_x(cfun, d):
    def dx(t, x, u):
        out = np.empty((d, d))
        for j in range(d):
            h = 1e-6 * (1.0 + abs(float(x[j])))
            xp = np.array(x, dtype=float)
            xm = np.array(x, dtype=float)
            xp[j] += h
            xm[j] -= h
            out[:, j] = (cfun(t, xp, u) - cfun(t, xm, u)) / (2.0 * h)
        return out
    return dx


def _fd_jacobian_u(cfun, d, r):
    def du(t, x, u):
        out = np.empty((d, r))
        for j in range(r):
            h = 1e-6 * (1.0 + abs(float(u[j])))
            up = np.array(u, dtype=float)
            um = np.array(u, dtype=float)
            up[j] += h
            um[j] -= h
            out[:, j] = (cfun(t, x, up) - cfun(t, x, um)) / (2.0 * h)
        return out
    return du


def _custom_scenario(cfg) -> Scenario:
    sec = cfg.get("coefficients")
    if not sec:
        raise ConfigFileError("coefficients: section required when run.scenario = custom")
    d = _get_int(cfg, "coefficients", "state_dim", minimum=1)
    x0_list = _get_float_list(cfg, "coefficients", "x0")
    if len(x0_list) != d:
        raise ConfigFileError(f"coefficients.x0: need {d} components, got {len(x0_list)}")
    model = _custom_model(cfg)
    r = model.mark_dimension
    sources = []
    for i in range(1, d + 1):
        src = sec.get(f"c_{i}")
        if src is None:
            raise ConfigFileError(f"coefficients.c_{i}: required")
        sources.append(src)
    try:
        cfun = compile_coefficient(sources, d, r)
    except InputError as exc:
        raise ConfigFileError(f"coefficients: {exc}") from exc
    coeffs = CoefficientSet(
        dim=d, c=cfun,
        dx_c=_fd_jacobian_x(cfun, d),
        du_c=_fd_jacobian_u(cfun, d, r),
        name="custom",
    )
    bs = _custom_structure(cfg, r)
    num = _numeric_overrides(cfg)
    horizon = num.get("horizon", 1.0)
    return Scenario(
        name="custom", dim=d, mark_dimension=r,
        horizon=horizon,
        eval_time=num.get("eval_time", horizon),
        x0=np.array(x0_list), step=num.get("step", 0.01),
        default_truncation=model.truncation,
        bottom=bs,
        make_model=lambda eps: model if eps == model.truncation else _retruncate(cfg, eps),
        make_coeffs=lambda m: coeffs,
        notes="user-supplied coefficient expressions",
    )


def _retruncate(cfg, eps: float) -> TruncatedLevyModel:
    sub = {k: dict(v) for k, v in cfg.items()}
    sub.setdefault("model", {})["truncation"] = repr(eps)
    return _custom_model(sub)


def _scenario_from_config(cfg) -> Scenario:
    name = _get(cfg, "run", "scenario")
    if name is None:
        raise ConfigFileError("run.scenario: required")
    if name == "custom":
        return _custom_scenario(cfg)
    if name in _SCENARIO_MODEL_KEYS:
        return _named_scenario(name, cfg)
    raise ConfigFileError(
        "run.scenario: unknown scenario "
        f"{name!r}; available: {', '.join(sorted(_SCENARIO_MODEL_KEYS))}, custom"
    )


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _write_samples_csv(path: Path, header: list[str], rows) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([format(float(v), ".17g") for v in row])


def _manifest(out_dir: Path, command: str, cfg, seed: int, threads: int,
              outputs: list[str]) -> None:
    # the echo carries the *resolved* seed and thread count so that feeding
    # the manifest back via --config reproduces the run even when those were
    # originally given on the command line
    echo = {sec: dict(keys) for sec, keys in cfg.items()}
    run = dict(echo.get("run", {}))
    run["seed"] = str(int(seed))
    run["threads"] = str(int(threads))
    echo["run"] = run
    doc = {
        "command": command,
        "config": echo,
        "outputs": sorted(outputs),
        "seed": int(seed),
        "threads": int(threads),
        "version": __version__,
    }
    _write_json(out_dir / "manifest.json", doc)


def _cross_check(reference_tag: str, reference: np.ndarray, candidate: np.ndarray,
                 tolerance: float) -> dict:
    diff = float(np.max(np.abs(reference - candidate))) if reference.size else 0.0
    return {
        "max_abs_difference": diff,
        "reference_tag": reference_tag,
        "tolerance": float(tolerance),
        "within_tolerance": bool(diff <= tolerance),
    }


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    _check_known_keys(cfg)
    seed = _resolve_seed(args, cfg)
    threads = _resolve_threads(args, cfg)
    scenario = _scenario_from_config(cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = scenario.simulate(seed=seed)
    _, _, traj = scenario.pipeline(config, t=scenario.horizon)
    write_trajectory_csv(traj, out_dir / "trajectory.csv")
    _manifest(out_dir, "simulate", cfg, seed, threads, ["trajectory.csv"])
    print(f"wrote {out_dir / 'trajectory.csv'} ({config.n_atoms} jumps)")
    return 0


def cmd_gamma(args) -> int:
    cfg = _load_config(args.config)
    _check_known_keys(cfg)
    seed = _resolve_seed(args, cfg)
    threads = _resolve_threads(args, cfg)
    tag = _get(cfg, "gamma", "formula", "theorem9")
    if tag not in _GAMMA_TAGS:
        raise ConfigFileError(
            f"gamma.formula: unknown tag {tag!r}; available: {', '.join(_GAMMA_TAGS)}"
        )
    include_terms = _get_bool(cfg, "gamma", "include_terms", False)
    draws = _get_int(cfg, "numeric", "draws", default=10000, minimum=2)
    scenario = _scenario_from_config(cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    config = scenario.simulate(seed=seed)
    model, coeffs, traj = scenario.pipeline(config)
    t = scenario.eval_time
    flow = gamma_flow(traj, coeffs, scenario.bottom, t)
    flow_left = gamma_flow_left(traj, coeffs, scenario.bottom, t)

    if tag == "theorem9":
        gm = flow
        check = _cross_check("remark3", flow_left.matrix, flow.matrix, 1e-10)
    elif tag == "remark3":
        gm = flow_left
        check = _cross_check("theorem9", flow.matrix, flow_left.matrix, 1e-10)
    else:
        if scenario.name == "doleans":
            m1 = power_law_first_moment(
                model.truncation,
                alpha=_get_float(cfg, "model", "alpha", 1.0),
                bound=_get_float(cfg, "model", "bound", 0.5),
                asymmetry=_get_float(cfg, "model", "asymmetry", 0.5),
            )
            functional = DoleansPairFunctional(m1, t)
            fd_tol = 1e-8 * (1.0 + float(np.max(np.abs(flow.matrix))))
        else:
            functional = SdeFunctional(coeffs, model, scenario.x0, scenario.step, t)
            fd_tol = 1e-4 * (1.0 + float(np.max(np.abs(flow.matrix))))
        if tag == "generic":
            gm = gamma_generic(functional, config, scenario.bottom)
            check = _cross_check("theorem9", flow.matrix, gm.matrix, fd_tol)
        else:
            gm = gamma_rho_mc(functional, config, scenario.bottom, draws, seed,
                              threads=threads)
            se = float(np.max(gm.standard_errors)) if gm.standard_errors is not None else 0.0
            check = _cross_check("theorem9", flow.matrix, gm.matrix,
                                 max(4.0 * se, fd_tol))

    rank = rank_diagnostic(gm)
    doc = {
        "cross_check": check,
        "gamma": gm.to_json_dict(include_terms=include_terms),
        "rank": rank.to_json_dict(),
    }
    _write_json(out_dir / "gamma.json", doc)
    _manifest(out_dir, "gamma", cfg, seed, threads, ["gamma.json"])
    print(
        f"gamma[{tag}] at t={t:g}: rank {rank.rank}/{gm.matrix.shape[0]}, "
        f"cross-check diff {check['max_abs_difference']:.3g}"
    )
    return 0


def cmd_rank_stats(args) -> int:
    cfg = _load_config(args.config)
    _check_known_keys(cfg)
    seed = _resolve_seed(args, cfg)
    threads = _resolve_threads(args, cfg)
    scenario = _scenario_from_config(cfg)
    epsilons = _get_float_list(cfg, "numeric", "epsilons")
    if not epsilons:
        raise ConfigFileError("numeric.epsilons: at least one truncation level required")
    n_paths = _get_int(cfg, "numeric", "n_paths", default=100, minimum=1)
    rel_tol = _get_float(cfg, "numeric", "rank_tolerance", default=1e-8, positive=True)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    table = monte_carlo_rank_stats(scenario, n_paths, epsilons, seed,
                                   rel_tol=rel_tol, threads=threads)
    table.to_csv(out_dir / "rank_stats.csv")
    summary = table.to_json_dict()
    summary["scenario"] = scenario.name
    summary["seed"] = int(seed)
    _write_json(out_dir / "summary.json", summary)
    _manifest(out_dir, "rank-stats", cfg, seed, threads,
              ["rank_stats.csv", "summary.json"])
    frac = ", ".join(f"{row.full_rank_fraction:.3f}" for row in table.rows)
    print(f"full-rank fractions over eps {epsilons}: {frac}")
    return 0


def _example_scenario_gamma(name: str, cfg, seed: int, out_dir: Path) -> list[str]:
    scenario = _named_scenario(name, cfg)
    config = scenario.simulate(seed=seed)
    model = scenario.model()
    if name == "doleans":
        res = doleans_dade(model, scenario.eval_time, seed, step=scenario.step,
                           bottom=scenario.bottom, config=config,
                           first_moment=None)
        pipe, closed = res.gamma_pipeline, res.gamma_closed
        extra = {"terminal": {"exponential": res.exponential, "y": res.y_t}}
        traj = res.trajectory
    else:
        case = "isotropic_case1" if name == "levy-area-1" else "graph_case2"
        coeffs = scenario.make_coeffs(model)
        m1 = coeffs.compensator(0.0, np.zeros(3))[:2]
        res = levy_area(model, scenario.eval_time, seed, case=case,
                        step=scenario.step, bottom=scenario.bottom,
                        config=config, first_moment=m1)
        pipe, closed = res.gamma_pipeline, res.gamma_closed
        extra = {
            "span_dimension": int(res.span_dim),
            "terminal": {"area": float(res.v[2]), "x1": float(res.v[0]), "x2": float(res.v[1])},
        }
        traj = res.trajectory
    scale = 1.0 + float(np.linalg.norm(closed))
    check = _cross_check("closed_form", closed, pipe.matrix, 1e-9 * scale)
    doc = {
        "cross_check": check,
        "gamma": pipe.to_json_dict(),
        "rank": rank_diagnostic(pipe).to_json_dict(),
    }
    doc.update(extra)
    _write_json(out_dir / "gamma.json", doc)
    write_trajectory_csv(traj, out_dir / "samples.csv")
    print(
        f"{name}: closed-form vs pipeline max diff "
        f"{check['max_abs_difference']:.3g} over {config.n_atoms} jumps"
    )
    return ["gamma.json", "samples.csv"]


def _example_mckean(cfg, seed: int, out_dir: Path) -> list[str]:
    model = power_law_model(
        _get_float(cfg, "model", "truncation", 0.05, positive=True),
        alpha=_get_float(cfg, "model", "alpha", 1.0),
        bound=_get_float(cfg, "model", "bound", 0.5),
        asymmetry=_get_float(cfg, "model", "asymmetry", 0.5),
    )

    def sigma(x: float, law: np.ndarray) -> float:
        return 0.6 + 0.2 * math.tanh(x) + 0.2 * math.tanh(float(np.mean(law)))

    res = mckean_vlasov(
        sigma, particles=24, picard_iters=3, model=model,
        t=_get_float(cfg, "numeric", "horizon", 1.0, positive=True),
        seed=seed,
        step=_get_float(cfg, "numeric", "step", 0.01, positive=True),
        first_moment=power_law_first_moment(
            model.truncation,
            _get_float(cfg, "model", "alpha", 1.0),
            _get_float(cfg, "model", "bound", 0.5),
            _get_float(cfg, "model", "asymmetry", 0.5),
        ),
    )
    doc = {
        "aa_invertible": res.aa_invertible,
        "aa_value": res.aa_value,
        "gamma": res.gamma.to_json_dict(),
        "picard_residuals": [float(r) for r in res.picard_residuals],
        "rank": rank_diagnostic(res.gamma).to_json_dict(),
    }
    _write_json(out_dir / "gamma.json", doc)
    _write_samples_csv(out_dir / "samples.csv", ["particle", "x_t"],
                       [(i, v) for i, v in enumerate(res.samples)])
    print(
        f"mckean: picard residuals {['%.3g' % r for r in res.picard_residuals]}, "
        f"gamma = {res.gamma.matrix[0, 0]:.6g}"
    )
    return ["gamma.json", "samples.csv"]


def _example_stable_like(cfg, seed: int, out_dir: Path) -> list[str]:
    u0 = 1.0
    x = 0.3
    band = (0.9, 1.7)

    def alpha_fn(xv: np.ndarray) -> float:
        return 1.3 + 0.3 * math.tanh(float(xv[0]))

    draws = _get_int(cfg, "numeric", "draws", default=20000, minimum=100)
    h = _get_float(cfg, "numeric", "step", 1e-3, positive=True)
    push = stable_like_pushforward_check(alpha_fn, u0, np.array([x]), band=band)
    gen = stable_like_generator_check(
        alpha_fn, u0, x, math.cos, h, draws, seed, band=band,
    )
    doc = {
        "generator_check": gen.to_json_dict(),
        "pushforward_max_relative_error": float(push),
        "zeta": {"0.5": zeta(0.5), "1.0": zeta(1.0), "1.5": zeta(1.5)},
    }
    _write_json(out_dir / "diagnostics.json", doc)
    zs = np.linspace(0.0, 20.0, 201)
    e1 = np.ones(1)
    rows = [
        (z, float(np.linalg.norm(
            stable_like_coefficient(alpha_fn, u0, np.array([x]), float(z), e1, band)
        )))
        for z in zs
    ]
    _write_samples_csv(out_dir / "samples.csv", ["z", "jump_magnitude"], rows)
    print(
        f"stable-like: pushforward residual {push:.3g}, generator residual "
        f"{gen.residual:.3g} (threshold {gen.threshold:.3g}, "
        f"{'pass' if gen.passed else 'FAIL'})"
    )
    return ["diagnostics.json", "samples.csv"]


def cmd_example(args) -> int:
    cfg = _load_config(args.config)
    _check_known_keys(cfg)
    seed = _resolve_seed(args, cfg)
    threads = _resolve_threads(args, cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = args.name
    if name in ("doleans", "levy-area-1", "levy-area-2"):
        outputs = _example_scenario_gamma(name, cfg, seed, out_dir)
    elif name == "mckean":
        outputs = _example_mckean(cfg, seed, out_dir)
    elif name == "stable-like":
        outputs = _example_stable_like(cfg, seed, out_dir)
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigFileError(f"unknown example {name!r}")
    _manifest(out_dir, f"example {name}", cfg, seed, threads, outputs)
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lentparticle",
        description="Poisson-functional carre du champ toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", default=None,
                       help="INI config or manifest JSON from a previous run")
        p.add_argument("--out", metavar="DIR", default=".",
                       help="output directory (created if missing)")
        p.add_argument("--seed", metavar="N", type=int, default=None,
                       help="root seed (overrides the config)")
        p.add_argument("--threads", metavar="N", type=int, default=None,
                       help="worker threads for path/draw loops")

    p = sub.add_parser("simulate", help="integrate one trajectory with its flows")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gamma", help="assemble a carre du champ matrix")
    common(p)
    p.set_defaults(func=cmd_gamma)

    p = sub.add_parser("rank-stats", help="full-rank statistics over truncation levels")
    common(p)
    p.set_defaults(func=cmd_rank_stats)

    p = sub.add_parser("example", help="run a shipped example end to end")
    p.add_argument("name", choices=_EXAMPLE_NAMES)
    common(p)
    p.set_defaults(func=cmd_example)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigFileError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LentParticleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
