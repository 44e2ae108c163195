"""Stored-energy densities and the discrete bulk/surface energies.

Three functionals act on jet fields over a common grid:

* the nonlinear energy, ``eps^-2 * elastic + eps^-2b * |second gradient|^2``
  plus ``kappa`` times the area of the value-jump set, finite only when the
  gradient jumps nowhere outside the value jumps;
* its relaxed variant, charging the union of both jump sets and never
  returning the infinity sentinel;
* the small-strain quadratic energy ``1/2 Q(e(u)) + kappa * area(J_u)`` for
  displacement jets, with ``Q`` the Hessian form of the density at the
  identity.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .fields import (
    DisplacementJet,
    JetField,
    ToleranceConfig,
    second_gradient,
    surface_measure,
    validate_field,
)
from .rotations import so_distance2, so_distance2_grad, sym

HESSIAN_STEP = 1.0e-4
HESSIAN_AGREEMENT = 1.0e-5


class ModelError(ValueError):
    """Raised for invalid energy-model parameters."""


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------


class Density:
    """Interface for frame-indifferent stored densities.

    Implementations provide the batched value ``w`` and analytic gradient
    ``grad`` and expose ``growth_constant`` c with
    ``w(F) >= c * dist(F, SO(d))^2``.
    """

    name: str = ""
    growth_constant: float = 1.0

    def w(self, F: np.ndarray) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def grad(self, F: np.ndarray) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def __eq__(self, other):
        return type(self) is type(other) and self.params() == other.params()

    def __hash__(self):
        return hash((type(self).__name__, tuple(sorted(self.params().items()))))


class SquaredDistanceWell(Density):
    """Canonical density ``W(F) = dist(F, SO(d))^2``.

    Zero exactly on SO(d), frame indifferent, with growth constant 1.  The
    reflected branch (``det F < 0``) charges the smallest singular value as
    ``(s_min + 1)^2``.
    """

    name = "so_distance"

    def w(self, F):
        return so_distance2(F)

    def grad(self, F):
        return so_distance2_grad(F)


class QuarticWell(Density):
    """Single-well density ``dist^2(F, SO(d)) + a |F^T F - Id|^2``.

    The quartic term keeps the well at SO(d) while changing the Hessian at
    the identity to ``(2 + 8a) |sym S|^2``; it exercises code paths that must
    not assume the canonical density.
    """

    name = "quartic_well"

    def __init__(self, quartic_weight: float = 0.25):
        if quartic_weight <= 0.0:
            raise ModelError("quartic_weight must be positive")
        self.quartic_weight = float(quartic_weight)

    def params(self):
        return {"quartic_weight": self.quartic_weight}

    def w(self, F):
        F = np.asarray(F, dtype=float)
        d = F.shape[-1]
        C = np.swapaxes(F, -1, -2) @ F - np.eye(d)
        return so_distance2(F) + self.quartic_weight * np.sum(C * C, axis=(-1, -2))

    def grad(self, F):
        F = np.asarray(F, dtype=float)
        d = F.shape[-1]
        C = np.swapaxes(F, -1, -2) @ F - np.eye(d)
        return so_distance2_grad(F) + 4.0 * self.quartic_weight * (F @ C)


DENSITIES = {
    SquaredDistanceWell.name: SquaredDistanceWell,
    QuarticWell.name: QuarticWell,
}


def make_density(name: str, **params) -> Density:
    if name not in DENSITIES:
        raise ModelError(
            f"unknown density {name!r}; available: {sorted(DENSITIES)}"
        )
    return DENSITIES[name](**params)


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyModel:
    """Parameters of the scaled functional.

    Attributes
    ----------
    density : Density
        Stored elastic density ``W``.
    eps : float
        Strain scale; the bulk term is weighted ``eps**-2``.
    beta : float
        Second-gradient exponent, weight ``eps**(-2*beta)``; must lie in
        (2/3, 1).
    gamma : float
        Gradient-quantisation exponent (bin width ``eps**gamma``); must lie
        in (2/3, beta).
    kappa : float
        Toughness: surface energy per unit jump area.
    """

    density: Density
    eps: float
    beta: float
    gamma: float
    kappa: float

    def __post_init__(self):
        problems = []
        if not self.eps > 0.0:
            problems.append(f"eps must be positive, got {self.eps}")
        if not 2.0 / 3.0 < self.beta < 1.0:
            problems.append(f"beta must lie in (2/3, 1), got {self.beta}")
        if not 2.0 / 3.0 < self.gamma < self.beta:
            problems.append(f"gamma must lie in (2/3, beta), got {self.gamma}")
        if not self.kappa > 0.0:
            problems.append(f"kappa must be positive, got {self.kappa}")
        if problems:
            raise ModelError("; ".join(problems))

    def with_eps(self, eps: float) -> "EnergyModel":
        return replace(self, eps=float(eps))


# ---------------------------------------------------------------------------
# energy reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyReport:
    """Decomposed energy value.

    ``total`` is the sum of the three terms when ``finite`` and ``None``
    otherwise; the infinity sentinel is this explicit flag, never a floating
    infinity fed to arithmetic.  ``constraint_ok`` records whether the
    gradient-jump set was contained in the value-jump set.
    """

    elastic: float
    second_gradient: float
    surface: float
    finite: bool
    constraint_ok: bool

    @property
    def total(self) -> Optional[float]:
        if not self.finite:
            return None
        return self.elastic + self.second_gradient + self.surface

    def total_label(self) -> str:
        t = self.total
        return "INF" if t is None else f"{t:.17g}"


def _check_field(fld, tol):
    report = validate_field(fld, tol)
    report.raise_if_failed()


def _bulk_terms(model: EnergyModel, y: JetField) -> tuple[float, float]:
    grid = y.grid
    hd = grid.cell_size**grid.dim
    elastic = float(model.eps ** (-2.0) * np.sum(model.density.w(y.grads)) * hd)
    T = second_gradient(y)
    second = float(model.eps ** (-2.0 * model.beta) * np.sum(T * T) * hd)
    return elastic, second


def nonlinear_energy(
    model: EnergyModel,
    y: JetField,
    check: bool = True,
    tol: ToleranceConfig | None = None,
) -> EnergyReport:
    """Scaled nonlinear energy of a deformation jet field.

    The report is flagged infinite when the declared gradient-jump set is not
    contained in the declared value-jump set; the bulk terms are still
    reported for diagnostics.  With ``check`` the field is validated first
    and an undeclared discontinuity raises ``FieldValidationError``.
    """
    if check:
        _check_field(y, tol)
    elastic, second = _bulk_terms(model, y)
    constraint_ok = y.jump_grads <= y.jump_values
    surface = model.kappa * surface_measure(y.jump_values, y.grid)
    return EnergyReport(
        elastic=elastic,
        second_gradient=second,
        surface=surface,
        finite=constraint_ok,
        constraint_ok=constraint_ok,
    )


def relaxed_energy(
    model: EnergyModel,
    y: JetField,
    check: bool = True,
    tol: ToleranceConfig | None = None,
) -> EnergyReport:
    """Relaxed energy: surface term on the union of both jump sets, always
    finite."""
    if check:
        _check_field(y, tol)
    elastic, second = _bulk_terms(model, y)
    surface = model.kappa * surface_measure(y.jump_values | y.jump_grads, y.grid)
    return EnergyReport(
        elastic=elastic,
        second_gradient=second,
        surface=surface,
        finite=True,
        constraint_ok=y.jump_grads <= y.jump_values,
    )


# ---------------------------------------------------------------------------
# quadratic form of the density at the identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticForm:
    """Symmetric quadratic form on d x d matrices, stored as a d^2 x d^2
    matrix acting on row-major vectorised inputs."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return int(round(math.isqrt(self.matrix.shape[0])))

    def __call__(self, S: np.ndarray) -> np.ndarray:
        """Evaluate ``Q(S)`` for one matrix ``(d, d)`` or a batch
        ``(..., d, d)``."""
        S = np.asarray(S, dtype=float)
        v = S.reshape(S.shape[:-2] + (-1,))
        out = np.einsum("...i,ij,...j->...", v, self.matrix, v)
        return float(out) if out.ndim == 0 else out


def _fd_hessian(density: Density, d: int, step: float) -> np.ndarray:
    n = d * d
    eye = np.eye(d)
    basis = [np.zeros((d, d)) for _ in range(n)]
    for k in range(n):
        basis[k][divmod(k, d)] = 1.0

    def w(M):
        return float(density.w(M[None, ...])[0])

    H = np.empty((n, n))
    w0 = w(eye)
    for a in range(n):
        Ea = basis[a]
        H[a, a] = (w(eye + step * Ea) - 2.0 * w0 + w(eye - step * Ea)) / step**2
        for b in range(a + 1, n):
            Eb = basis[b]
            val = (
                w(eye + step * (Ea + Eb))
                - w(eye + step * (Ea - Eb))
                - w(eye - step * (Ea - Eb))
                + w(eye - step * (Ea + Eb))
            ) / (4.0 * step**2)
            H[a, b] = val
            H[b, a] = val
    return 0.5 * (H + H.T)


@functools.lru_cache(maxsize=32)
def _hessian_cached(density: Density, d: int, step: float) -> QuadraticForm:
    H = _fd_hessian(density, d, step)
    H_half = _fd_hessian(density, d, 0.5 * step)
    scale = 1.0 + float(np.max(np.abs(H)))
    disagreement = float(np.max(np.abs(H - H_half)))
    if disagreement > HESSIAN_AGREEMENT * scale:
        raise ModelError(
            f"finite-difference Hessian failed the step-halving check: "
            f"disagreement {disagreement:.3e} exceeds "
            f"{HESSIAN_AGREEMENT:.0e} * {scale:.3e}"
        )
    return QuadraticForm(matrix=H)


def hessian_quadratic_form(
    model: EnergyModel, dim: int = 2, step: float = HESSIAN_STEP
) -> QuadraticForm:
    """Quadratic form ``Q = D^2 W(Id)`` by central finite differences.

    Uses step ``1e-4``, symmetrises, and verifies a step-halving
    (Richardson) consistency of ``1e-5`` relative to the entry scale,
    raising ``ModelError`` on disagreement.
    """
    return _hessian_cached(model.density, int(dim), float(step))


def expansion_remainder(
    model: EnergyModel, F: np.ndarray, q: QuadraticForm | None = None
) -> float:
    """Remainder ``W(Id + F) - 1/2 Q(sym F)`` of the quadratic expansion.

    Only defined for ``|F| <= 1`` (Frobenius); larger arguments are rejected.
    """
    F = np.asarray(F, dtype=float)
    norm = float(np.sqrt(np.sum(F * F)))
    if norm > 1.0:
        raise ModelError(f"expansion remainder requires |F| <= 1, got {norm:.3f}")
    d = F.shape[-1]
    if q is None:
        q = hessian_quadratic_form(model, dim=d)
    wval = float(model.density.w((np.eye(d) + F)[None, ...])[0])
    return wval - 0.5 * float(q(sym(F)))


# ---------------------------------------------------------------------------
# small-strain energy
# ---------------------------------------------------------------------------


def linear_energy(
    model: EnergyModel,
    q: QuadraticForm,
    u: DisplacementJet,
    check: bool = True,
    tol: ToleranceConfig | None = None,
) -> EnergyReport:
    """Small-strain energy ``sum 1/2 Q(e(u)) h^d + kappa * area(jumps)``."""
    if check:
        _check_field(u, tol)
    grid = u.grid
    hd = grid.cell_size**grid.dim
    elastic = float(0.5 * np.sum(q(u.strains())) * hd)
    surface = model.kappa * surface_measure(u.jumps, grid)
    return EnergyReport(
        elastic=elastic,
        second_gradient=0.0,
        surface=surface,
        finite=True,
        constraint_ok=True,
    )
