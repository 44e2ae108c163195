"""Pointwise identities, recovery families and limsup tables."""

import numpy as np
import pytest

from jetfrac.energy import EnergyModel, EnergyReport, make_density
from jetfrac.fields import DisplacementJet, Grid
from jetfrac.linearize import (
    LimsupRow,
    LimsupTable,
    LinearizeError,
    build_recovery,
    fjm_identity_check,
    limsup_check,
    rotation_symmetry_bound,
)
from jetfrac.presets import (
    boxed_step_displacement,
    displacement_from_boundary,
    quadratic_boundary,
    sine_boundary,
)
from jetfrac.rotations import random_rotation, rotation_2d


def model(eps=0.1, kappa=1.0):
    return EnergyModel(
        density=make_density("so_distance"), eps=eps, beta=0.8, gamma=0.7, kappa=kappa
    )


@pytest.fixture
def unit_grid():
    return Grid(outer=((0, 1), (0, 1)), inner=((0.25, 0.75), (0.25, 0.75)), cell_size=0.0625)


# ---------------------------------------------------------------------------
# pointwise identities
# ---------------------------------------------------------------------------


def test_fjm_identity_exact_on_rotations():
    theta = 0.3
    lhs, rhs, rem = fjm_identity_check(rotation_2d(theta))
    assert rhs == pytest.approx(0.0, abs=1e-12)
    assert lhs == pytest.approx(np.sqrt(2) * (1 - np.cos(theta)))
    assert rem == pytest.approx(lhs)


def test_fjm_remainder_is_second_order():
    rng = np.random.default_rng(0)
    G = rng.normal(size=(2, 2))
    G /= np.linalg.norm(G)
    rems = []
    for t in (0.1, 0.05, 0.025):
        _, _, rem = fjm_identity_check(np.eye(2) + t * G)
        rems.append(abs(rem))
    assert rems[1] <= rems[0] / 3.0
    assert rems[2] <= rems[1] / 3.0


def test_fjm_identity_batched():
    batch = np.stack([np.eye(2), rotation_2d(0.2), np.diag([2.0, 1.0])])
    lhs, rhs, rem = fjm_identity_check(batch)
    assert lhs.shape == rhs.shape == rem.shape == (3,)
    assert rhs[2] == pytest.approx(1.0)


def test_rotation_symmetry_bound_ratio():
    # for planar rotations the ratio lhs / |R1-R2|^2 is the constant sqrt(2)/4
    rng = np.random.default_rng(1)
    for _ in range(10):
        a, b = rng.uniform(-np.pi / 2, np.pi / 2, size=2)
        lhs, rhs2 = rotation_symmetry_bound(rotation_2d(a), rotation_2d(b))
        if rhs2 > 1e-20:
            assert lhs == pytest.approx(np.sqrt(2) / 4 * rhs2, rel=1e-9)
        assert lhs <= 0.5 * rhs2 + 1e-15


def test_rotation_symmetry_bound_three_dimensional():
    rng = np.random.default_rng(2)
    R1, R2 = random_rotation(rng, 3), random_rotation(rng, 3)
    lhs, rhs2 = rotation_symmetry_bound(R1, R2)
    assert lhs <= 0.5 * rhs2 + 1e-12


def test_rotation_symmetry_bound_rejects_bad_inputs():
    with pytest.raises(LinearizeError, match="orthogonal"):
        rotation_symmetry_bound(np.diag([2.0, 0.5]), np.eye(2))
    with pytest.raises(LinearizeError, match="determinant"):
        rotation_symmetry_bound(np.diag([1.0, -1.0]), np.eye(2))
    with pytest.raises(LinearizeError, match="square"):
        rotation_symmetry_bound(np.zeros((2, 3)), np.eye(2))


# ---------------------------------------------------------------------------
# recovery families
# ---------------------------------------------------------------------------


def test_build_recovery_smooth_displacement(unit_grid):
    h = quadratic_boundary(0.15)
    u = displacement_from_boundary(unit_grid, h)
    eps_values = [1 / 8, 1 / 16, 1 / 32]
    fam = build_recovery(u, model(), eps_values, h_bc=h)
    assert len(fam) == 3
    x = unit_grid.cell_centers()
    for eps, v, y, s, m_v, budget in zip(
        fam.eps_values,
        fam.displacements,
        fam.deformations,
        fam.blend_factors,
        fam.sup_norms,
        fam.budgets,
    ):
        assert s == 1.0  # the smooth field fits the budget outright
        assert m_v <= budget
        assert budget == pytest.approx(eps ** ((0.8 - 1.0) / 2.0))
        assert np.allclose(y.values, x + eps * v.values)
        assert np.allclose(y.grads, np.eye(2) + eps * v.grads)
        assert y.jump_values == u.jumps and y.jump_grads == u.jumps


def test_build_recovery_keeps_crack(unit_grid):
    u = boxed_step_displacement(unit_grid, [[0.375, 0.625], [0.375, 0.625]], [0.4, 0.0])
    fam = build_recovery(u, model(), [0.1, 0.05])
    for y in fam.deformations:
        assert y.jump_values == u.jumps
        assert y.jump_grads == u.jumps


def test_build_recovery_rejects_frame_mismatch(unit_grid):
    u = displacement_from_boundary(unit_grid, sine_boundary(0.5))
    with pytest.raises(LinearizeError, match="frame"):
        build_recovery(u, model(), [0.1])  # compared against the zero datum


def test_build_recovery_rejects_infeasible_budget(unit_grid):
    h = sine_boundary(10.0)
    u = displacement_from_boundary(unit_grid, h)
    with pytest.raises(LinearizeError, match="infeasible"):
        build_recovery(u, model(), [0.9], h_bc=h)


def test_build_recovery_blends_towards_boundary(unit_grid):
    # a displacement matching the zero datum on the frame but oscillating
    # inside: the blend factor must shrink it onto the sup-norm budget
    n = unit_grid.n_cells
    x = unit_grid.cell_centers()
    inner = unit_grid.inner_mask()
    values = np.zeros((n, 2))
    bump = np.where(
        inner,
        np.sin(40 * np.pi * x[:, 0]) * np.sin(40 * np.pi * x[:, 1]),
        0.0,
    )
    grads = np.zeros((n, 2, 2))
    grads[:, 0, 0] = 30.0 * bump
    u = DisplacementJet(unit_grid, values, grads)
    fam = build_recovery(u, model(), [0.5])
    assert fam.blend_factors[0] < 1.0
    assert fam.sup_norms[0] <= fam.budgets[0]
    # the blend is a straight interpolation towards the boundary datum
    v = fam.displacements[0]
    assert np.allclose(v.grads, fam.blend_factors[0] * grads)


# ---------------------------------------------------------------------------
# limsup tables
# ---------------------------------------------------------------------------


def test_limsup_smooth_gap_shrinks(unit_grid):
    c = 0.15
    h = quadratic_boundary(c)
    u = displacement_from_boundary(unit_grid, h)
    eps_values = [1 / 8, 1 / 16, 1 / 32]
    table = limsup_check(build_recovery(u, model(), eps_values, h_bc=h))
    # limiting energy: 0.5 * int 2|e(u)|^2 = 8 c^2 / 3 on the unit square
    assert table.limit_energy == pytest.approx(8 * c * c / 3, rel=1e-2)
    gaps = table.gaps()
    assert all(g > 0 for g in gaps)
    assert gaps[1] < gaps[0] and gaps[2] < gaps[1]
    assert table.final_relative_gap() == abs(gaps[-1]) / max(table.limit_energy, 1.0)
    # the second-gradient column decays like eps^(2 - 2 beta)
    sg = [r.second_gradient_term for r in table.rows]
    assert sg[1] / sg[0] == pytest.approx(0.5 ** (2 - 2 * 0.8), rel=1e-6)


def test_limsup_piecewise_rigid_family_is_exact(unit_grid):
    u = boxed_step_displacement(unit_grid, [[0.375, 0.625], [0.375, 0.625]], [0.4, 0.0])
    table = limsup_check(build_recovery(u, model(kappa=1.0), [0.1, 0.05, 0.025]))
    assert table.limit_energy == pytest.approx(1.0)  # kappa * box perimeter
    for row in table.rows:
        assert row.nonlinear_total == pytest.approx(row.linear_total)
        assert row.gap == 0.0
        assert row.second_gradient_term == 0.0
    assert table.final_relative_gap() == 0.0


def test_final_relative_gap_uses_smallest_eps():
    rep = EnergyReport(0.0, 0.0, 0.0, True, True)
    rows = (
        LimsupRow(0.05, 1.3, 1.0, 0.3, 0.0, rep),
        LimsupRow(0.2, 2.0, 1.0, 1.0, 0.0, rep),  # coarsest listed last
    )
    table = LimsupTable(rows=rows, limit_energy=1.0)
    assert table.final_relative_gap() == pytest.approx(0.3)
