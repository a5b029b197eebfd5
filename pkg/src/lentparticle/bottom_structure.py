"""Carre du champ on mark space and its randomised square root.

A structure on the mark space consists of an open set ``O`` carrying the
intensity ``k``, a continuous ``psi`` with ``0 <= psi <= k``, and a field of
symmetric matrices ``xi``.  The induced quadratic form on gradients is

    gamma[f](u) = sum_ij xi_ij(u) d_i f(u) d_j f(u) * psi(u) / k(u),

with the convention ``0/0 = 0`` off the support of ``k``.  Everything the
library computes from a structure factors through the weight matrix
``W(u) = xi(u) * psi(u) / k(u)`` and its Cholesky-type square root ``L(u)``:

* ``gamma_scalar`` / ``gamma_matrix``  -- the quadratic form itself,
* ``gradient_flat`` -- the randomised gradient ``grad f . L(u) rho`` whose
  second moment over a standard normal ``rho`` reproduces ``gamma``.

The chain rule for ``gradient_flat`` holds exactly per draw, not only in
distribution, which is what makes pathwise gradient assembly possible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InputError, StructureError

__all__ = [
    "BottomStructure",
    "gamma_scalar",
    "gamma_matrix",
    "gradient_flat",
    "intro_1d",
    "isotropic",
    "psi_over_k",
    "standard_instances",
    "from_expressions",
    "check_ellipticity",
]

# slack used when spot-checking psi <= k and positive semi-definiteness
_PSD_SLACK = 1e-10


@dataclass(frozen=True)
class BottomStructure:
    """Mark-space carre du champ ``(O, xi, psi, k)``.

    ``support`` is the predicate for ``O``; ``density``, ``psi`` map a
    length-``r`` vector to a scalar; ``xi`` maps it to a symmetric
    ``(r, r)`` matrix (for ``r = 1`` a scalar is accepted).
    """

    mark_dimension: int
    support: Callable[[np.ndarray], bool]
    density: Callable[[np.ndarray], float]
    psi: Callable[[np.ndarray], float]
    xi: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"

    def weight(self, u: np.ndarray) -> np.ndarray:
        """Weight matrix ``W(u) = xi psi / k`` with the 0/0 = 0 convention."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        r = self.mark_dimension
        if u.shape != (r,):
            raise InputError(f"mark must have shape ({r},), got {u.shape}")
        if not self.support(u):
            return np.zeros((r, r))
        p = float(self.psi(u))
        if p == 0.0:
            return np.zeros((r, r))
        k = float(self.density(u))
        if k == 0.0:
            # psi <= k forces psi = 0 here; a nonzero psi is a broken structure
            raise StructureError(f"psi(u) = {p} > 0 where k(u) = 0 (requires psi <= k)")
        if p > k * (1.0 + 1e-12):
            raise StructureError(f"psi(u) = {p} exceeds k(u) = {k}")
        xi = np.atleast_2d(np.asarray(self.xi(u), dtype=float))
        if xi.shape != (r, r):
            raise StructureError(f"xi(u) must have shape ({r}, {r}), got {xi.shape}")
        if not np.allclose(xi, xi.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(xi).max())):
            raise StructureError("xi(u) must be symmetric")
        w = xi * (p / k)
        return 0.5 * (w + w.T)

    def factor(self, u: np.ndarray) -> np.ndarray:
        """Square root ``L(u)`` with ``L L^T = W(u)``.

        Uses the Cholesky factor when the weight is positive definite and an
        eigenvalue square root when it is only positive semi-definite (for
        instance rank-one tangential structures).
        """
        w = self.weight(u)
        if not w.any():
            return np.zeros_like(w)
        if self.mark_dimension == 1:
            val = w[0, 0]
            if val < -_PSD_SLACK * max(1.0, abs(val)):
                raise StructureError(f"negative weight {val} at u = {u}")
            return np.array([[np.sqrt(max(val, 0.0))]])
        try:
            return np.linalg.cholesky(w)
        except np.linalg.LinAlgError:
            vals, vecs = np.linalg.eigh(w)
            scale = max(vals[-1], 1.0)
            if vals[0] < -_PSD_SLACK * scale:
                raise StructureError(
                    f"weight matrix has negative eigenvalue {vals[0]} at u = {u}"
                ) from None
            return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None)))


def _check_gradient(grad: np.ndarray, r: int, what: str) -> np.ndarray:
    grad = np.asarray(grad, dtype=float)
    if grad.ndim == 1:
        if grad.shape != (r,):
            raise InputError(f"{what} must have shape ({r},), got {grad.shape}")
    elif grad.ndim == 2:
        if grad.shape[1] != r:
            raise InputError(f"{what} must have {r} columns, got shape {grad.shape}")
    else:
        raise InputError(f"{what} must be 1- or 2-dimensional")
    if not np.all(np.isfinite(grad)):
        raise InputError(f"{what} contains non-finite entries")
    return grad


def gamma_scalar(grad: np.ndarray, u: np.ndarray, structure: BottomStructure) -> float:
    """Quadratic form ``grad . W(u) grad`` for a scalar function's gradient."""
    grad = _check_gradient(grad, structure.mark_dimension, "gradient")
    if grad.ndim != 1:
        raise InputError("gamma_scalar expects a single gradient vector")
    val = float(grad @ structure.weight(u) @ grad)
    if val < 0.0:
        if val < -_PSD_SLACK * max(1.0, float(grad @ grad)):
            raise StructureError(f"carre du champ came out negative ({val})")
        val = 0.0
    return val


def gamma_matrix(jac: np.ndarray, u: np.ndarray, structure: BottomStructure) -> np.ndarray:
    """Matrix form ``J W(u) J^T`` for a vector function's mark Jacobian ``J``."""
    jac = _check_gradient(jac, structure.mark_dimension, "jacobian")
    jac = np.atleast_2d(jac)
    out = jac @ structure.weight(u) @ jac.T
    return 0.5 * (out + out.T)


def gradient_flat(grad: np.ndarray, u: np.ndarray, rho: np.ndarray,
                  structure: BottomStructure) -> float | np.ndarray:
    """Randomised gradient ``grad . L(u) rho``.

    ``rho`` is a length-``r`` auxiliary vector (standard normal in the
    calculus; any vector is accepted here).  For a ``(d, r)`` Jacobian the
    result is the length-``d`` vector of per-component values — the lift is
    linear, so components share one draw.
    """
    r = structure.mark_dimension
    grad = _check_gradient(grad, r, "gradient")
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (r,):
        raise InputError(f"rho must have shape ({r},), got {rho.shape}")
    pushed = structure.factor(u) @ rho
    if grad.ndim == 1:
        return float(grad @ pushed)
    return np.atleast_2d(grad) @ pushed


# ---------------------------------------------------------------------------
# named instances
# ---------------------------------------------------------------------------

def intro_1d() -> BottomStructure:
    """Scalar structure with weight ``u^2`` on ``0 < |u| < 1/2``.

    ``gamma[f](u) = u^2 f'(u)^2`` inside the window and zero outside; the
    psi/k ratio is one on the support, so the weight is ``xi = u^2`` alone.
    """
    return BottomStructure(
        mark_dimension=1,
        support=lambda u: 0.0 < abs(float(u[0])) < 0.5,
        density=lambda u: 1.0,
        psi=lambda u: 1.0,
        xi=lambda u: np.array([[float(u[0]) ** 2]]),
        name="INTRO_1D",
    )


def isotropic(r: int = 2, cap: float = 1.0) -> BottomStructure:
    """Isotropic structure ``xi = (|u|^2 ^ cap) I`` with ``psi = k``.

    The weight is ``min(|u|^2, cap)`` times the identity, bounded so the
    two-sided ellipticity estimate holds on every compact away from 0.
    """
    if r < 1:
        raise InputError("mark dimension must be >= 1")
    if not (np.isfinite(cap) and cap > 0):
        raise InputError("cap must be finite and > 0")

    def xi(u: np.ndarray) -> np.ndarray:
        return min(float(u @ u), cap) * np.eye(r)

    return BottomStructure(
        mark_dimension=r,
        support=lambda u: bool(u @ u > 0.0),
        density=lambda u: 1.0,
        psi=lambda u: 1.0,
        xi=xi,
        name="ISOTROPIC_RD",
    )


def psi_over_k(
    density: Callable[[np.ndarray], float] | None = None,
    psi: Callable[[np.ndarray], float] | None = None,
    r: int = 1,
    xi: Callable[[np.ndarray], np.ndarray] | None = None,
    support: Callable[[np.ndarray], bool] | None = None,
    name: str = "PSI_OVER_K",
) -> BottomStructure:
    """General ratio structure; defaults give weight ``|u|^2 I`` with psi = k.

    Pass ``density`` and ``psi`` to weight the default ``xi = |u|^2 I`` by a
    nontrivial ratio, or override ``xi`` entirely.
    """
    if density is None:
        density = lambda u: 1.0
    if psi is None:
        psi = lambda u: float(density(u))
    if xi is None:
        xi = lambda u: float(u @ u) * np.eye(r)
    if support is None:
        support = lambda u: bool(u @ u > 0.0)
    return BottomStructure(
        mark_dimension=r, support=support, density=density, psi=psi, xi=xi, name=name,
    )


def standard_instances() -> dict[str, BottomStructure]:
    """Catalog of the named structures used by the shipped scenarios."""
    return {
        "INTRO_1D": intro_1d(),
        "ISOTROPIC_RD": isotropic(2),
        "PSI_OVER_K": psi_over_k(),
    }


def from_expressions(
    k: str,
    psi: str,
    xi_diagonal: list[str],
    mark_dimension: int | None = None,
    name: str = "custom",
) -> BottomStructure:
    """Build a structure from mini-grammar strings for k, psi and diag(xi).

    The expressions see the mark components as ``u1 .. ur`` and support the
    operators ``+ - * / ^``, ``abs``, ``min`` and ``ind(a)`` (indicator of
    ``|u| < a``).  ``xi`` is diagonal with one expression per component.
    """
    from .expressions import compile_mark_scalar

    r = len(xi_diagonal) if mark_dimension is None else mark_dimension
    if len(xi_diagonal) != r:
        raise InputError(
            f"need {r} diagonal xi expressions, got {len(xi_diagonal)}"
        )
    k_fn = compile_mark_scalar(k, r)
    psi_fn = compile_mark_scalar(psi, r)
    diag_fns = [compile_mark_scalar(src, r) for src in xi_diagonal]

    def xi(u: np.ndarray) -> np.ndarray:
        return np.diag([float(f(u)) for f in diag_fns])

    return BottomStructure(
        mark_dimension=r,
        support=lambda u: bool(u @ u > 0.0),
        density=lambda u: float(k_fn(u)),
        psi=lambda u: float(psi_fn(u)),
        xi=xi,
        name=name,
    )


def check_ellipticity(structure: BottomStructure, points: np.ndarray) -> tuple[float, float]:
    """Spot-check two-sided ellipticity of ``xi`` at sample points.

    Returns the smallest and largest eigenvalue of ``xi`` encountered over
    the given ``(n, r)`` points inside the support, raising
    :class:`StructureError` if the lower bound is not strictly positive.
    Only meaningful for structures meant to be locally elliptic; tangential
    (rank-deficient) structures fail by design.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    lo, hi = np.inf, -np.inf
    seen = 0
    for u in points:
        if not structure.support(u):
            continue
        seen += 1
        xi = np.atleast_2d(np.asarray(structure.xi(u), dtype=float))
        vals = np.linalg.eigvalsh(0.5 * (xi + xi.T))
        lo = min(lo, float(vals[0]))
        hi = max(hi, float(vals[-1]))
    if seen == 0:
        raise InputError("no sample point fell inside the support")
    if lo <= 0.0:
        raise StructureError(f"xi not elliptic on the sample: min eigenvalue {lo}")
    return lo, hi
