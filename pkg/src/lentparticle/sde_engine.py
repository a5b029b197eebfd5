"""Pathwise solution of jump SDEs driven by a truncated Poisson measure.

The state follows

    dX_t = c(t, X_{t-}, u) dN~(dt, du) + b(t, X_t) dt

where ``N~`` is the compensated measure of a :class:`TruncatedLevyModel`.
Under truncation this splits into a deterministic flow between atoms,

    dX/dt = b(t, X) - integral_{|u|>eps} c(t, X, u) k(u) du,

integrated by a classical fourth-order one-step method whose steps land
exactly on the jump times, plus the update ``X_a = X_{a-} + c(a, X_{a-}, u)``
at each atom.

Alongside X the module integrates the first-variation flow ``K_t``
(Jacobian of the solution map in the initial condition) and its inverse
``Kbar_t``.  Both follow linear equations driven by the same atoms:

    K  : jump factor (I + Dx_c),       drift  A(t) K
    Kbar: jump factor (I + Dx_c)^{-1},  drift  -Kbar A(t)

with ``A = Dx_b - integral Dx_c k du``.  They are integrated jointly with X
on the same grid so the three stay mutually consistent.

``affine_solution`` solves the companion affine equation
``S_t = R_t + int_0^t dSigma_s S_{s-}`` by variation of constants using the
stored flows, where ``Sigma`` is the driver of K.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ConditioningWarning,
    DomainError,
    InputError,
    ModelError,
    NumericError,
    StateError,
)
from .poisson_measure import JumpConfiguration, TruncatedLevyModel, mark_integral

__all__ = [
    "CoefficientSet",
    "Trajectory",
    "validate_coefficients",
    "solve_sde",
    "solve_flow_derivative",
    "solve_inverse_flow",
    "solve_with_flows",
    "affine_solution",
    "write_trajectory_csv",
    "read_trajectory_csv",
]

_ETA_SLACK = 1.0 + 1e-9


@dataclass(frozen=True)
class CoefficientSet:
    """Coefficients of the jump SDE with their x-derivatives.

    ``c(t, x, u)`` is the jump amplitude, ``dx_c`` / ``du_c`` its Jacobians
    in the state and in the mark.  ``drift`` is the deterministic driver
    part (the only driver component supported; see module notes), and
    ``compensator(t, x) = integral c(t, x, u) k(u) du`` may be supplied in
    closed form -- strongly recommended, since the quadrature fallback runs
    inside every integrator stage.  ``eta`` is the dominating function used
    by the assumption validators; when absent only invertibility of
    ``I + dx_c`` is enforced.
    """

    dim: int
    c: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    dx_c: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    du_c: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    drift: Callable[[float, np.ndarray], np.ndarray] | None = None
    dx_drift: Callable[[float, np.ndarray], np.ndarray] | None = None
    compensator: Callable[[float, np.ndarray], np.ndarray] | None = None
    dx_compensator: Callable[[float, np.ndarray], np.ndarray] | None = None
    eta: Callable[[np.ndarray], float] | None = None
    name: str = "custom"

    def __post_init__(self):
        if self.dim < 1:
            raise InputError("state dimension must be >= 1")
        if (self.drift is None) != (self.dx_drift is None):
            raise InputError("drift and dx_drift must be supplied together")


def _effective_drift(coeffs: CoefficientSet, model: TruncatedLevyModel):
    """Between-jump velocity b - integral c k du and its x-Jacobian."""
    d = coeffs.dim
    comp = coeffs.compensator
    if comp is None:
        def comp(t: float, x: np.ndarray) -> np.ndarray:  # quadrature fallback
            return np.array([
                mark_integral(lambda u, i=i: float(coeffs.c(t, x, u)[i]), model)
                for i in range(d)
            ])
    comp_dx = coeffs.dx_compensator
    if comp_dx is None:
        def comp_dx(t: float, x: np.ndarray) -> np.ndarray:
            out = np.empty((d, d))
            for i in range(d):
                for j in range(d):
                    out[i, j] = mark_integral(
                        lambda u, i=i, j=j: float(coeffs.dx_c(t, x, u)[i, j]), model
                    )
            return out

    if coeffs.drift is None:
        velocity = lambda t, x: -np.asarray(comp(t, x), dtype=float)
        jacobian = lambda t, x: -np.asarray(comp_dx(t, x), dtype=float)
    else:
        velocity = lambda t, x: np.asarray(coeffs.drift(t, x), dtype=float) - np.asarray(comp(t, x), dtype=float)
        jacobian = lambda t, x: np.asarray(coeffs.dx_drift(t, x), dtype=float) - np.asarray(comp_dx(t, x), dtype=float)
    return velocity, jacobian


def _check_r_conditions(coeffs: CoefficientSet, t: float, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Spot-check the standing coefficient assumptions at one point.

    Returns ``I + dx_c`` for reuse.  Raises :class:`ModelError` naming the
    violated condition.
    """
    d = coeffs.dim
    dxc = np.asarray(coeffs.dx_c(t, x, u), dtype=float)
    if dxc.shape != (d, d) or not np.all(np.isfinite(dxc)):
        raise ModelError(f"dx_c at (t={t}) must be a finite ({d}, {d}) matrix")
    m = np.eye(d) + dxc
    eta_val = None
    if coeffs.eta is not None:
        eta_val = float(coeffs.eta(u))
        if np.linalg.norm(dxc, 2) > eta_val * _ETA_SLACK:
            raise ModelError(
                f"jump x-Jacobian norm {np.linalg.norm(dxc, 2):.4g} exceeds eta({u}) = {eta_val:.4g}"
            )
        c0 = np.asarray(coeffs.c(t, np.zeros(d), u), dtype=float)
        if np.linalg.norm(c0) > eta_val * _ETA_SLACK:
            raise ModelError(
                f"jump size at x = 0 norm {np.linalg.norm(c0):.4g} exceeds eta({u}) = {eta_val:.4g}"
            )
    try:
        inv = np.linalg.inv(m)
    except np.linalg.LinAlgError:
        raise ModelError(f"jump update I + dx_c singular at (t={t}, u={u})") from None
    if not np.all(np.isfinite(inv)):
        raise ModelError(f"jump update I + dx_c numerically singular at (t={t}, u={u})")
    if eta_val is not None and np.linalg.norm(inv, 2) > eta_val * _ETA_SLACK:
        raise ModelError(
            f"inverse jump update norm {np.linalg.norm(inv, 2):.4g} exceeds eta({u}) = {eta_val:.4g}"
        )
    return m


def validate_coefficients(
    coeffs: CoefficientSet,
    model: TruncatedLevyModel,
    points: Sequence[tuple[float, np.ndarray, np.ndarray]],
) -> None:
    """Spot-check the coefficient assumptions at the given (t, x, u) points."""
    for t, x, u in points:
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        val = np.asarray(coeffs.c(t, x, u), dtype=float)
        if val.shape != (coeffs.dim,) or not np.all(np.isfinite(val)):
            raise ModelError(f"c at (t={t}) must be a finite length-{coeffs.dim} vector")
        _check_r_conditions(coeffs, t, x, u)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Path of X (and optionally the flows) on the merged event/output grid.

    Row ``i`` holds the right limit at ``times[i]``; ``*_left`` arrays hold
    the left limits, which differ only on jump rows.  ``atom_index[i]`` is
    the index into ``config`` of the atom at a jump row, ``-1`` elsewhere.
    """

    times: np.ndarray
    is_jump: np.ndarray
    atom_index: np.ndarray
    states: np.ndarray
    states_left: np.ndarray
    config: JumpConfiguration
    coeffs: CoefficientSet | None
    model: TruncatedLevyModel | None
    step: float
    x0: np.ndarray
    flow: np.ndarray | None = None
    flow_left: np.ndarray | None = None
    inverse_flow: np.ndarray | None = None
    inverse_flow_left: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def row_at(self, t: float) -> int:
        """Index of the last stored time <= t."""
        if not (self.times[0] <= t <= self.times[-1] * (1 + 1e-12)):
            raise DomainError(f"time {t} outside stored range [0, {self.times[-1]}]")
        return int(np.searchsorted(self.times, t, side="right") - 1)

    def value_at(self, t: float) -> np.ndarray:
        return self.states[self.row_at(t)]

    def jump_rows(self) -> np.ndarray:
        return np.nonzero(self.is_jump)[0]

    def has_flows(self) -> bool:
        return self.flow is not None and self.inverse_flow is not None


def _build_grid(config: JumpConfiguration, horizon: float, step: float):
    if not (np.isfinite(step) and step > 0):
        raise InputError(f"step must be finite and > 0, got {step}")
    if not (np.isfinite(horizon) and 0 < horizon <= config.horizon):
        raise DomainError(f"horizon must lie in (0, {config.horizon}], got {horizon}")
    n_reg = max(1, int(math.ceil(horizon / step - 1e-12)))
    regular = np.linspace(0.0, horizon, n_reg + 1)
    jump_times = config.times[config.times <= horizon]
    times = np.union1d(regular, jump_times)
    is_jump = np.isin(times, jump_times)
    atom_index = np.full(times.shape, -1, dtype=int)
    if jump_times.size:
        atom_index[is_jump] = np.searchsorted(config.times, times[is_jump])
    return times, is_jump, atom_index


def _rk4_interval(rhs, t0: float, t1: float, y: np.ndarray) -> np.ndarray:
    h = t1 - t0
    k1 = rhs(t0, y)
    k2 = rhs(t0 + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t0 + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t1, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _integrate(
    coeffs: CoefficientSet,
    model: TruncatedLevyModel,
    config: JumpConfiguration,
    x0: np.ndarray,
    step: float,
    horizon: float,
    with_flow: bool,
    with_inverse: bool,
    validate: bool,
):
    """One pass over the grid computing X and whichever flows are requested.

    X, K and Kbar are advanced through the same integrator stages, so a
    later pass that adds a flow reproduces the earlier X values bit for bit.
    """
    d = coeffs.dim
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (d,):
        raise InputError(f"x0 must have shape ({d},), got {x0.shape}")
    times, is_jump, atom_index = _build_grid(config, horizon, step)
    m = times.shape[0]
    dd = d * d

    velocity, vel_jac = _effective_drift(coeffs, model)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        x = y[:d]
        out = np.empty_like(y)
        out[:d] = velocity(t, x)
        if with_flow or with_inverse:
            a = vel_jac(t, x)
            pos = d
            if with_flow:
                k = y[pos:pos + dd].reshape(d, d)
                out[pos:pos + dd] = (a @ k).ravel()
                pos += dd
            if with_inverse:
                kb = y[pos:pos + dd].reshape(d, d)
                out[pos:pos + dd] = -(kb @ a).ravel()
        return out

    states = np.empty((m, d))
    states_left = np.empty((m, d))
    flow = np.empty((m, d, d)) if with_flow else None
    flow_left = np.empty((m, d, d)) if with_flow else None
    inv_flow = np.empty((m, d, d)) if with_inverse else None
    inv_flow_left = np.empty((m, d, d)) if with_inverse else None

    y = np.concatenate([x0] + ([np.eye(d).ravel()] if with_flow else [])
                       + ([np.eye(d).ravel()] if with_inverse else []))

    def unpack(yv):
        pos = d
        out = [yv[:d]]
        if with_flow:
            out.append(yv[pos:pos + dd].reshape(d, d))
            pos += dd
        if with_inverse:
            out.append(yv[pos:pos + dd].reshape(d, d))
        return out

    def store(i, left_vals, right_vals):
        states_left[i] = left_vals[0]
        states[i] = right_vals[0]
        pos = 1
        if with_flow:
            flow_left[i] = left_vals[pos]
            flow[i] = right_vals[pos]
            pos += 1
        if with_inverse:
            inv_flow_left[i] = left_vals[pos]
            inv_flow[i] = right_vals[pos]

    store(0, unpack(y), unpack(y))
    for i in range(1, m):
        y = _rk4_interval(rhs, times[i - 1], times[i], y)
        if not np.all(np.isfinite(y)):
            raise NumericError(f"integration produced non-finite state at t = {times[i]}")
        left = [np.array(v) for v in unpack(y)]
        if is_jump[i]:
            t = float(times[i])
            u = config.marks[atom_index[i]]
            x_left = left[0]
            if validate:
                jump_matrix = _check_r_conditions(coeffs, t, x_left, u)
            else:
                jump_matrix = np.eye(d) + np.asarray(coeffs.dx_c(t, x_left, u), dtype=float)
            x_right = x_left + np.asarray(coeffs.c(t, x_left, u), dtype=float)
            if not np.all(np.isfinite(x_right)):
                raise NumericError(f"jump update produced non-finite state at t = {t}")
            right = [x_right]
            if with_flow:
                right.append(jump_matrix @ left[1])
            if with_inverse:
                kb_left = left[-1]
                try:
                    kb_right = np.linalg.solve(jump_matrix.T, kb_left.T).T
                except np.linalg.LinAlgError:
                    raise ModelError(
                        f"jump update I + dx_c singular at (t={t}, u={u})"
                    ) from None
                right.append(kb_right)
            y = np.concatenate([v.ravel() for v in right])
            store(i, left, right)
        else:
            store(i, left, left)

    return times, is_jump, atom_index, states, states_left, flow, flow_left, inv_flow, inv_flow_left


def solve_sde(
    coeffs: CoefficientSet,
    model: TruncatedLevyModel,
    config: JumpConfiguration,
    x0: np.ndarray,
    step: float,
    horizon: float | None = None,
    validate: bool = True,
) -> Trajectory:
    """Solve the jump SDE pathwise on the given configuration.

    The returned trajectory stores X at every regular grid point and jump
    time, with left limits at jumps.  With ``validate`` the coefficient
    assumptions are spot-checked at every jump actually taken.
    """
    horizon = config.horizon if horizon is None else float(horizon)
    times, is_jump, atom_index, states, states_left, *_ = _integrate(
        coeffs, model, config, x0, step, horizon,
        with_flow=False, with_inverse=False, validate=validate,
    )
    return Trajectory(
        times=times, is_jump=is_jump, atom_index=atom_index,
        states=states, states_left=states_left,
        config=config, coeffs=coeffs, model=model, step=step,
        x0=np.asarray(x0, dtype=float),
    )


def _require_engine_fields(traj: Trajectory):
    if traj.coeffs is None or traj.model is None:
        raise StateError("trajectory lacks coefficient/model references")


def solve_flow_derivative(traj: Trajectory, coeffs: CoefficientSet | None = None) -> Trajectory:
    """Fill the first-variation flow K on an existing trajectory.

    K starts at the identity, picks up the factor ``I + dx_c`` at each atom
    and follows ``dK/dt = A(t) K`` in between.  X is re-integrated jointly
    (identical stages, identical values) so K is consistent with the stored
    path.
    """
    coeffs = coeffs or traj.coeffs
    if coeffs is None:
        raise StateError("no coefficient set available")
    _require_engine_fields(traj)
    _, _, _, states, _, flow, flow_left, _, _ = _integrate(
        coeffs, traj.model, traj.config, traj.x0, traj.step, traj.horizon,
        with_flow=True, with_inverse=False, validate=False,
    )
    if not np.allclose(states, traj.states, rtol=1e-10, atol=1e-12):
        raise NumericError("flow pass diverged from the stored path")
    traj.flow = flow
    traj.flow_left = flow_left
    return traj


def solve_inverse_flow(
    traj: Trajectory,
    coeffs: CoefficientSet | None = None,
    method: str = "direct_sde",
) -> Trajectory:
    """Fill the inverse flow Kbar.

    ``direct_sde`` integrates Kbar's own equation (jump factor
    ``(I + dx_c)^{-1}``, drift ``-Kbar A``); ``per_step_inverse`` inverts
    the stored K row by row.  Both fill the same fields; their agreement is
    a consistency check on the linear algebra.
    """
    coeffs = coeffs or traj.coeffs
    if coeffs is None:
        raise StateError("no coefficient set available")
    if method == "direct_sde":
        _require_engine_fields(traj)
        _, _, _, states, _, _, _, inv_flow, inv_flow_left = _integrate(
            coeffs, traj.model, traj.config, traj.x0, traj.step, traj.horizon,
            with_flow=False, with_inverse=True, validate=False,
        )
        if not np.allclose(states, traj.states, rtol=1e-10, atol=1e-12):
            raise NumericError("inverse-flow pass diverged from the stored path")
        traj.inverse_flow = inv_flow
        traj.inverse_flow_left = inv_flow_left
    elif method == "per_step_inverse":
        if traj.flow is None:
            raise StateError("per_step_inverse requires the flow K to be filled first")
        inv_flow = np.linalg.inv(traj.flow)
        inv_flow_left = np.linalg.inv(traj.flow_left)
        traj.inverse_flow = inv_flow
        traj.inverse_flow_left = inv_flow_left
    else:
        raise InputError(f"unknown inverse-flow method {method!r}")

    if traj.flow is not None:
        resid = np.abs(np.einsum("tij,tjk->tik", traj.flow, traj.inverse_flow)
                       - np.eye(traj.dim)).max()
        if resid > 1e-9:
            warnings.warn(
                f"K Kbar deviates from identity by {resid:.3g}; consider a smaller step",
                ConditioningWarning, stacklevel=2,
            )
        conds = np.linalg.cond(traj.flow)
        worst = float(np.max(conds))
        if worst > 1e12:
            warnings.warn(
                f"flow condition number reaches {worst:.3g}; inverse flow may be inaccurate",
                ConditioningWarning, stacklevel=2,
            )
    return traj


def solve_with_flows(
    coeffs: CoefficientSet,
    model: TruncatedLevyModel,
    config: JumpConfiguration,
    x0: np.ndarray,
    step: float,
    horizon: float | None = None,
    validate: bool = True,
) -> Trajectory:
    """Solve the SDE and fill both flows in one pass over the grid."""
    horizon = config.horizon if horizon is None else float(horizon)
    times, is_jump, atom_index, states, states_left, flow, flow_left, inv_flow, inv_flow_left = _integrate(
        coeffs, model, config, x0, step, horizon,
        with_flow=True, with_inverse=True, validate=validate,
    )
    traj = Trajectory(
        times=times, is_jump=is_jump, atom_index=atom_index,
        states=states, states_left=states_left,
        config=config, coeffs=coeffs, model=model, step=step,
        x0=np.asarray(x0, dtype=float),
        flow=flow, flow_left=flow_left,
        inverse_flow=inv_flow, inverse_flow_left=inv_flow_left,
    )
    resid = np.abs(np.einsum("tij,tjk->tik", flow, inv_flow) - np.eye(coeffs.dim)).max()
    if resid > 1e-9:
        warnings.warn(
            f"K Kbar deviates from identity by {resid:.3g}; consider a smaller step",
            ConditioningWarning, stacklevel=2,
        )
    return traj


# ---------------------------------------------------------------------------
# affine companion equation
# ---------------------------------------------------------------------------

def affine_solution(
    traj: Trajectory,
    r_values: np.ndarray,
    r_left: np.ndarray | None = None,
    check: bool = True,
    check_tol: float = 1e-8,
) -> np.ndarray:
    """Solve ``S_t = R_t + int_0^t dSigma_s S_{s-}`` along the trajectory.

    ``Sigma`` is the driver of the stored flow K (atom factors ``dx_c``,
    continuous part ``A dt``).  ``r_values`` gives R at the stored times
    (right limits); ``r_left`` its left limits, defaulting to the previous
    right limit (pure-jump R).  The driver has no continuous-martingale
    part, so the bracket correction of the general variation-of-constants
    formula vanishes and

        S_t = K_t [ R_0 + sum_{s<=t} Kbar_s (R_s - R_{s-})
                          + sum_intervals Kbar_{start} (R_{end-} - R_{start}) ]

    where the jump weight ``Kbar_s = Kbar_{s-} (I + dx_c)^{-1}`` already
    contains the ``(I + Delta Sigma)^{-1}`` correction of the formula.  With
    ``check`` the result is verified against the one-step recursion of the
    defining equation and a :class:`NumericError` is raised on disagreement.
    """
    if not traj.has_flows():
        raise StateError("affine_solution requires K and Kbar filled")
    if traj.coeffs is None:
        raise StateError("trajectory lacks coefficient references")
    m, d = traj.states.shape
    r_values = np.asarray(r_values, dtype=float)
    if r_values.shape != (m, d):
        raise InputError(f"r_values must have shape ({m}, {d}), got {r_values.shape}")
    if r_left is None:
        r_left = np.empty_like(r_values)
        r_left[0] = r_values[0]
        r_left[1:] = r_values[:-1]
    else:
        r_left = np.asarray(r_left, dtype=float)
        if r_left.shape != (m, d):
            raise InputError(f"r_left must have shape ({m}, {d}), got {r_left.shape}")

    out = np.empty((m, d))
    acc = r_values[0].copy()
    out[0] = traj.flow[0] @ acc
    for i in range(1, m):
        acc = acc + traj.inverse_flow[i - 1] @ (r_left[i] - r_values[i - 1])
        acc = acc + traj.inverse_flow[i] @ (r_values[i] - r_left[i])
        out[i] = traj.flow[i] @ acc

    if check:
        scale = max(1.0, float(np.abs(out).max()), float(np.abs(r_values).max()))
        worst = 0.0
        for i in range(1, m):
            s_left = traj.flow_left[i] @ (traj.inverse_flow[i - 1]
                                          @ (out[i - 1] + (r_left[i] - r_values[i - 1])))
            if traj.is_jump[i]:
                t = float(traj.times[i])
                u = traj.config.marks[traj.atom_index[i]]
                dxc = np.asarray(traj.coeffs.dx_c(t, traj.states_left[i], u), dtype=float)
                s_right = s_left + dxc @ s_left + (r_values[i] - r_left[i])
            else:
                s_right = s_left + (r_values[i] - r_left[i])
            worst = max(worst, float(np.abs(s_right - out[i]).max()))
        if worst > check_tol * scale:
            raise NumericError(
                "affine solution failed its defining-equation residual check",
                residual=worst,
            )
    return out


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Write ``time, is_jump, X_1..X_d[, K_11..K_dd[, Kbar_11..Kbar_dd]]``.

    Flow columns appear only when the corresponding fields are filled;
    matrix entries are row-major.  Jump rows carry right limits.
    """
    d = traj.dim
    header = ["time", "is_jump"] + [f"X_{i + 1}" for i in range(d)]
    if traj.flow is not None:
        header += [f"K_{i + 1}{j + 1}" for i in range(d) for j in range(d)]
    if traj.inverse_flow is not None:
        header += [f"Kbar_{i + 1}{j + 1}" for i in range(d) for j in range(d)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(traj.times.shape[0]):
            row = [_fmt(traj.times[i]), str(int(traj.is_jump[i]))]
            row += [_fmt(v) for v in traj.states[i]]
            if traj.flow is not None:
                row += [_fmt(v) for v in traj.flow[i].ravel()]
            if traj.inverse_flow is not None:
                row += [_fmt(v) for v in traj.inverse_flow[i].ravel()]
            w.writerow(row)


def read_trajectory_csv(path) -> dict:
    """Read a trajectory CSV back into arrays.

    Returns a dict with keys ``times``, ``is_jump``, ``states`` and, when
    present in the file, ``flow`` / ``inverse_flow``.  Left limits are not
    stored in the export format.
    """
    with open(path, "r", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty file")
    header = rows[0]
    if header[:2] != ["time", "is_jump"]:
        raise InputError(f"{path}: unexpected header {header[:2]!r}")
    d = sum(1 for name in header if name.startswith("X_"))
    if d == 0:
        raise InputError(f"{path}: no state columns found")
    n_k = sum(1 for name in header if name.startswith("K_"))
    n_kb = sum(1 for name in header if name.startswith("Kbar_"))
    data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)
    data = data.reshape(len(rows) - 1, len(header))
    out = {
        "times": data[:, 0],
        "is_jump": data[:, 1].astype(bool),
        "states": data[:, 2:2 + d],
    }
    pos = 2 + d
    if n_k:
        out["flow"] = data[:, pos:pos + n_k].reshape(-1, d, d)
        pos += n_k
    if n_kb:
        out["inverse_flow"] = data[:, pos:pos + n_kb].reshape(-1, d, d)
    return out
