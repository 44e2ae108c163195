"""Linearization identities and the recovery construction for the limsup bound.

Two families of algebraic facts are checked here: the second-order identity
``|sym(F - Id)| = dist(F, SO(d)) + O(|F - Id|^2)`` (and its cousin for pairs
of rotations), and the recovery construction that turns an admissible limit
displacement ``u`` into deformations ``y_eps = id + eps * v_eps`` whose
energies converge to the small-strain energy of ``u``.

The recovery admits piecewise-smooth displacements with facet-aligned cracks
only; such inputs are energy-dense in the limit class, and the jet
discretization cannot represent anything wilder anyway.  ``v_eps`` is a blend
``h + s * (u - h)`` whose blend factor enforces the sup-norm budget
``eps ** ((beta - 1) / 2)`` on first plus second discrete gradients; for
desk-scale inputs the budget diverges as ``eps -> 0`` and the blend is
eventually the identity ``v_eps = u``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import (
    EnergyModel,
    EnergyReport,
    QuadraticForm,
    hessian_quadratic_form,
    linear_energy,
    nonlinear_energy,
)
from .fields import (
    BoundaryDatum,
    DisplacementJet,
    JetField,
    second_gradient,
    zero_boundary,
)
from .rotations import frobenius, so_distance2, sym

#: The blend targets this fraction of the sup-norm budget, leaving headroom
#: so the post-hoc check of the true discrete norms cannot trip on rounding.
BUDGET_SAFETY = 0.9

#: Frame compatibility: the recovery input must equal the boundary
#: displacement on frame cells to this absolute accuracy.
FRAME_MATCH_TOL = 1.0e-9


class LinearizeError(ValueError):
    """Raised when a recovery input violates the admissibility conditions."""


# ---------------------------------------------------------------------------
# pointwise identities
# ---------------------------------------------------------------------------


def fjm_identity_check(F: np.ndarray):
    """Compare ``|sym(F - Id)|`` with ``dist(F, SO(d))``.

    Returns ``(lhs, rhs, remainder)`` with ``remainder = lhs - rhs``; the
    remainder is second order in ``|F - Id|``.  Accepts a single matrix or a
    batch with matrices on the last two axes.
    """
    F = np.asarray(F, dtype=float)
    d = F.shape[-1]
    lhs = frobenius(sym(F - np.eye(d)))
    rhs = np.sqrt(so_distance2(F))
    if F.ndim == 2:
        lhs = float(lhs)
        rhs = float(rhs)
    return lhs, rhs, lhs - rhs


def rotation_symmetry_bound(
    R1: np.ndarray, R2: np.ndarray, tol: float = 1.0e-9
) -> tuple[float, float]:
    """Return ``(|sym(R2 R1^T - Id)|, |R1 - R2|^2)`` for two rotations.

    The first quantity is controlled by a constant times the second; the pair
    lets callers bound that constant empirically.  Inputs are checked to be
    special orthogonal.
    """
    pair = []
    for name, R in (("R1", R1), ("R2", R2)):
        R = np.asarray(R, dtype=float)
        d = R.shape[-1]
        if R.shape != (d, d):
            raise LinearizeError(f"{name} must be a square matrix")
        if float(np.abs(R.T @ R - np.eye(d)).max()) > tol:
            raise LinearizeError(f"{name} is not orthogonal")
        if abs(float(np.linalg.det(R)) - 1.0) > tol:
            raise LinearizeError(f"{name} has determinant != 1")
        pair.append(R)
    R1, R2 = pair
    d = R1.shape[-1]
    lhs = float(frobenius(sym(R2 @ R1.T - np.eye(d))))
    diff = float(frobenius(R1 - R2))
    return lhs, diff**2


# ---------------------------------------------------------------------------
# recovery families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RecoveryFamily:
    """Deformations ``y_eps = id + eps * v_eps`` recovering a displacement.

    ``displacements`` are the blended fields ``v_eps`` (sharing the crack of
    ``u``), ``deformations`` the corresponding jet fields, ``budgets`` the
    sup-norm budgets ``eps ** ((beta-1)/2)``, ``blend_factors`` the applied
    blend weights (1.0 once the budget stops binding) and ``sup_norms`` the
    measured discrete ``|grad v| + |grad^2 v|`` sup norms.
    """

    u: DisplacementJet
    h_bc: BoundaryDatum
    model: EnergyModel
    eps_values: tuple
    displacements: tuple
    deformations: tuple
    budgets: tuple
    blend_factors: tuple
    sup_norms: tuple

    def __len__(self) -> int:
        return len(self.eps_values)


def _sup_norms(jet: DisplacementJet) -> float:
    """Discrete ``|grad v|_inf + |grad^2 v|_inf`` of a displacement jet."""
    n1 = float(np.abs(jet.grads).max(initial=0.0))
    n2 = float(np.abs(second_gradient(jet)).max(initial=0.0))
    return n1 + n2


def build_recovery(
    u: DisplacementJet,
    model: EnergyModel,
    eps_values,
    h_bc: BoundaryDatum | None = None,
) -> RecoveryFamily:
    """Construct the recovery family ``y_eps = id + eps * v_eps`` for ``u``.

    Requirements: ``u`` equals the boundary displacement on every frame cell
    (to ``1e-9``), and its crack is a set of grid facets (enforced by the jet
    type).  The blend ``v_eps = h + s (u - h)`` keeps the boundary condition
    exact for every blend factor; ``s`` is chosen so the discrete sup-norm
    budget holds, and an ``eps`` whose budget is infeasible even for ``v = h``
    is rejected.
    """
    if h_bc is None:
        h_bc = zero_boundary()
    grid = u.grid
    x = grid.cell_centers()
    hv = np.asarray(h_bc.value(x), dtype=float)
    hg = np.asarray(h_bc.grad(x), dtype=float)
    frame = ~grid.inner_mask()
    if frame.any():
        dev = max(
            float(np.abs(u.values[frame] - hv[frame]).max(initial=0.0)),
            float(np.abs(u.grads[frame] - hg[frame]).max(initial=0.0)),
        )
        if dev > FRAME_MATCH_TOL:
            raise LinearizeError(
                "recovery input must equal the boundary displacement on the "
                f"frame; found deviation {dev:.3e}"
            )
    # Give h the same crack stencil as u so the blend is stencil-linear and
    # the triangle inequality on the sup norms is exact.
    h_jet = DisplacementJet(grid, hv, hg, jumps=u.jumps)
    w_jet = DisplacementJet(grid, u.values - hv, u.grads - hg, jumps=u.jumps)
    m_h = _sup_norms(h_jet)
    m_w = _sup_norms(w_jet)

    exponent = (model.beta - 1.0) / 2.0
    eps_values = tuple(float(e) for e in eps_values)
    displacements = []
    deformations = []
    budgets = []
    factors = []
    norms = []
    identity = np.eye(grid.dim)
    for eps in eps_values:
        budget = eps**exponent
        if m_w <= 0.0:
            s = 1.0
        elif m_h + m_w <= BUDGET_SAFETY * budget:
            s = 1.0
        else:
            s = max(0.0, (BUDGET_SAFETY * budget - m_h) / m_w)
        v = DisplacementJet(
            grid,
            hv + s * w_jet.values,
            hg + s * w_jet.grads,
            jumps=u.jumps,
        )
        m_v = _sup_norms(v)
        if m_v > budget:
            raise LinearizeError(
                f"sup-norm budget {budget:.3e} at eps={eps} is infeasible: "
                f"the boundary displacement alone measures {m_v:.3e}"
            )
        y = JetField(
            grid,
            x + eps * v.values,
            identity + eps * v.grads,
            jump_values=u.jumps,
            jump_grads=u.jumps,
        )
        displacements.append(v)
        deformations.append(y)
        budgets.append(budget)
        factors.append(s)
        norms.append(m_v)
    return RecoveryFamily(
        u=u,
        h_bc=h_bc,
        model=model,
        eps_values=eps_values,
        displacements=tuple(displacements),
        deformations=tuple(deformations),
        budgets=tuple(budgets),
        blend_factors=tuple(factors),
        sup_norms=tuple(norms),
    )


# ---------------------------------------------------------------------------
# limsup table
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LimsupRow:
    eps: float
    nonlinear_total: float
    linear_total: float
    gap: float
    second_gradient_term: float
    report: EnergyReport


@dataclass(frozen=True)
class LimsupTable:
    """Energies of the recovery family against the limiting energy."""

    rows: tuple
    limit_energy: float

    def gaps(self) -> list[float]:
        return [r.gap for r in self.rows]

    def final_relative_gap(self) -> float:
        """|gap| at the smallest eps, normalized by max(limit energy, 1)."""
        last = min(self.rows, key=lambda r: r.eps)
        return abs(last.gap) / max(self.limit_energy, 1.0)


def limsup_check(
    family: RecoveryFamily, model: EnergyModel | None = None, q: QuadraticForm | None = None
) -> LimsupTable:
    """Tabulate ``E_eps(y_eps)`` against the limiting energy of ``u``.

    The second-gradient contribution ``eps^(2-2beta) * |grad^2 v_eps|^2`` is
    reported in its own column; it must vanish as ``eps -> 0``.  Fields are
    taken as constructed by :func:`build_recovery`, so energies are evaluated
    without re-running jet compatibility validation.
    """
    if model is None:
        model = family.model
    if q is None:
        q = hessian_quadratic_form(model, dim=family.u.grid.dim)
    limit = linear_energy(model, q, family.u, check=False)
    rows = []
    for eps, y in zip(family.eps_values, family.deformations):
        m = model.with_eps(eps)
        rep = nonlinear_energy(m, y, check=False)
        rows.append(
            LimsupRow(
                eps=eps,
                nonlinear_total=float(rep.total),
                linear_total=float(limit.total),
                gap=float(rep.total) - float(limit.total),
                second_gradient_term=rep.second_gradient,
                report=rep,
            )
        )
    return LimsupTable(rows=tuple(rows), limit_energy=float(limit.total))
