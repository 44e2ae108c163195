"""Caccioppoli partitions, grain rotations and rigidity certificates."""

import numpy as np
import pytest

from jetfrac.energy import EnergyModel, make_density
from jetfrac.fields import DisplacementJet, Grid
from jetfrac.presets import (
    affine_step_displacement,
    identity_field,
    rotation_pair,
    sine_boundary,
    single_label,
    small_displacement_field,
    two_piece_labels,
)
from jetfrac.rigidity import (
    BoundConstants,
    RigidityError,
    certify_rigidity,
    certify_sweep,
    coarea_partition,
    compare_limit_strains,
    fit_rotations,
    loglog_slope,
    partition_from_labels,
    piecewise_rotate,
    rescale_displacement,
)
from jetfrac.rotations import rotation_2d


def model(eps):
    return EnergyModel(
        density=make_density("so_distance"), eps=eps, beta=0.8, gamma=0.7, kappa=1.0
    )


@pytest.fixture
def strip():
    # one unit of frame on the left, cut at x1 = 2 inside the inner box
    return Grid(outer=((0, 3), (0, 1)), inner=((1, 3), (0, 1)), cell_size=0.125)


# ---------------------------------------------------------------------------
# partitions from labels
# ---------------------------------------------------------------------------


def test_partition_from_labels_two_grains(strip):
    eps = 0.125
    y = rotation_pair(strip, eps, cut=2.0)
    part = partition_from_labels(y, two_piece_labels(strip, 2.0))
    assert part.n_grains == 2
    assert part.boundary == strip.facet_plane(0, 2.0)
    # representative gradients are exactly the two constant gradients
    assert np.allclose(part.representatives[0], np.eye(2))
    assert np.allclose(part.representatives[1], rotation_2d(eps))
    # only the left piece reaches the frame x1 < 1
    assert part.touches_frame.tolist() == [True, False]
    assert np.allclose(part.max_deviation, 0.0)
    sizes = part.grain_sizes()
    assert sizes.sum() == strip.n_cells and sizes[1] == 8 * 8


def test_partition_labels_reindexed_densely(strip):
    y = identity_field(strip)
    raw = np.where(strip.cell_centers()[:, 0] > 2.0, 9, 5)
    part = partition_from_labels(y, raw)
    assert sorted(np.unique(part.labels)) == [0, 1]


def test_partition_rejects_bad_label_shape(strip):
    y = identity_field(strip)
    with pytest.raises(RigidityError, match="shape"):
        partition_from_labels(y, np.zeros(3, dtype=int))


# ---------------------------------------------------------------------------
# automatic coarea partition
# ---------------------------------------------------------------------------


def test_coarea_splits_rotation_pair(strip):
    # sin(eps) exceeds a sixteenth of the bin width, so the off-diagonal
    # gradient components land in different bins across the cut
    eps = 0.125
    part = coarea_partition(rotation_pair(strip, eps, cut=2.0), model(eps))
    assert part.n_grains == 2
    assert part.boundary == strip.facet_plane(0, 2.0)
    assert part.bin_width == pytest.approx(eps**0.7)


def test_coarea_keeps_smooth_field_whole(strip):
    # gradient range eps*|grad h| stays below the bin width -> one grain
    eps = 0.125
    y = small_displacement_field(strip, eps, sine_boundary(0.8))
    part = coarea_partition(y, model(eps))
    assert part.n_grains == 1
    assert part.boundary == frozenset()


def test_coarea_boundary_prefers_declared_facets(strip):
    # thresholds are chosen so the grain boundary rides the declared cut
    eps = 0.125
    y = rotation_pair(strip, eps, cut=2.0)
    part = coarea_partition(y, model(eps))
    assert part.boundary <= y.jump_grads


# ---------------------------------------------------------------------------
# rotation fitting and unrotation
# ---------------------------------------------------------------------------


def test_fit_rotations_pins_frame_grains(strip):
    eps = 0.125
    y = rotation_pair(strip, eps, cut=2.0)
    part = fit_rotations(partition_from_labels(y, two_piece_labels(strip, 2.0)))
    assert np.allclose(part.rotations[0], np.eye(2))
    assert np.allclose(part.rotations[1], rotation_2d(eps), atol=1e-12)
    assert np.allclose(part.rotations_inv[1], rotation_2d(-eps), atol=1e-12)


def test_piecewise_rotate_recovers_identity(strip):
    eps = 0.125
    y = rotation_pair(strip, eps, cut=2.0)
    part = fit_rotations(partition_from_labels(y, two_piece_labels(strip, 2.0)))
    y_rot = piecewise_rotate(y, part)
    x = strip.cell_centers()
    assert np.allclose(y_rot.values, x, atol=1e-13)
    assert np.allclose(y_rot.grads, np.eye(2), atol=1e-13)
    # the cut was already declared so no new jump facets appear
    assert y_rot.jump_values == y.jump_values
    assert y_rot.jump_grads == y.jump_grads


def test_piecewise_rotate_requires_fitted_rotations(strip):
    y = identity_field(strip)
    part = partition_from_labels(y, single_label(strip))
    with pytest.raises(RigidityError, match="fit_rotations"):
        piecewise_rotate(y, part)


def test_identical_rotations_add_no_jumps(strip):
    # split the identity map in two grains: both fit the identity rotation,
    # so the partition boundary never enters the jump sets
    y = identity_field(strip)
    part = fit_rotations(partition_from_labels(y, two_piece_labels(strip, 2.0)))
    y_rot = piecewise_rotate(y, part)
    assert y_rot.jump_values == frozenset()
    assert y_rot.jump_grads == frozenset()


def test_unrotation_charges_undeclared_boundary(strip):
    eps = 0.125
    y = rotation_pair(strip, eps, cut=2.0)
    stripped = type(y)(strip, y.values, y.grads)  # drop the declared cut
    part = fit_rotations(partition_from_labels(stripped, two_piece_labels(strip, 2.0)))
    y_rot = piecewise_rotate(stripped, part)
    assert y_rot.jump_values == strip.facet_plane(0, 2.0)
    assert y_rot.jump_grads == strip.facet_plane(0, 2.0)


def test_rescale_displacement_recovers_boundary_datum(strip):
    eps = 0.0625
    h = sine_boundary(0.8)
    y = small_displacement_field(strip, eps, h)
    part = fit_rotations(partition_from_labels(y, single_label(strip)))
    u = rescale_displacement(piecewise_rotate(y, part), model(eps))
    x = strip.cell_centers()
    assert np.allclose(u.values, h.value(x), atol=1e-12)
    assert np.allclose(u.grads, h.grad(x), atol=1e-12)
    assert u.jumps == frozenset()


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------


def test_certificate_two_grain_description_is_exact(strip):
    eps = 0.125
    m = model(eps)
    y = rotation_pair(strip, eps, cut=2.0)
    part = fit_rotations(partition_from_labels(y, two_piece_labels(strip, 2.0)))
    cert = certify_rigidity(y, piecewise_rotate(y, part), part, m)
    assert cert.n_grains == 2
    assert cert.frame_deviation <= 1e-13
    assert cert.jump_excess == 0.0
    assert cert.partition_excess == 0.0
    assert cert.sym_defect <= 1e-12
    assert cert.grad_defect <= 1e-12
    assert cert.ok


def test_certificate_single_grain_scaling(strip):
    # one grain pinned to the identity: the strain defect is quadratic in
    # eps and the gradient defect linear, both inside the default budgets
    eps = 0.125
    m = model(eps)
    y = rotation_pair(strip, eps, cut=2.0)
    part = fit_rotations(partition_from_labels(y, single_label(strip)))
    cert = certify_rigidity(y, piecewise_rotate(y, part), part, m)
    assert cert.n_grains == 1
    # right piece has area 1, gradient defect |R - Id|_F = 2 sqrt(2) sin(eps/2)
    assert cert.grad_defect == pytest.approx(2 * np.sqrt(2) * np.sin(eps / 2), rel=1e-12)
    assert cert.sym_defect == pytest.approx(np.sqrt(2) * (1 - np.cos(eps)), rel=1e-12)
    assert cert.ok


def test_certificate_detects_frame_violation(strip):
    # certify against the wrong boundary datum: the frame check must fail
    eps = 0.125
    m = model(eps)
    y = small_displacement_field(strip, eps, sine_boundary(0.8))
    part = fit_rotations(partition_from_labels(y, single_label(strip)))
    cert = certify_rigidity(y, piecewise_rotate(y, part), part, m, h_bc=None)
    assert cert.frame_deviation > 1e-3
    assert not cert.frame_ok and not cert.ok
    good = certify_rigidity(
        y, piecewise_rotate(y, part), part, m, h_bc=sine_boundary(0.8)
    )
    assert good.frame_ok


def test_budgets_follow_the_model_scales(strip):
    eps = 0.0625
    m = model(eps)
    y = rotation_pair(strip, eps, cut=2.0)
    part = fit_rotations(partition_from_labels(y, two_piece_labels(strip, 2.0)))
    consts = BoundConstants(frame=1e-9, excess=3.0, sym=2.0, grad=1.5)
    cert = certify_rigidity(y, piecewise_rotate(y, part), part, m, constants=consts)
    assert cert.excess_budget == pytest.approx(3.0 * eps ** (m.beta - m.gamma))
    assert cert.sym_budget == pytest.approx(2.0 * eps)
    assert cert.grad_budget == pytest.approx(1.5 * eps**m.gamma)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


def test_sweep_single_grain_slopes(strip):
    eps_values = [1 / 8, 1 / 16, 1 / 32, 1 / 64]
    sweep = certify_sweep(
        lambda e: rotation_pair(strip, e, cut=2.0),
        model(eps_values[0]),
        eps_values,
        partition_builder=lambda y, m: partition_from_labels(y, single_label(y.grid)),
    )
    assert sweep.all_ok
    assert sweep.slopes["sym"] == pytest.approx(2.0, abs=0.05)
    assert sweep.slopes["grad"] == pytest.approx(1.0, abs=0.05)
    assert sweep.slopes["excess"] == 0.0  # no extra jumps were ever created
    assert all(r.coarea_ok for r in sweep.rows)
    assert len(sweep.certificates()) == len(eps_values)


def test_sweep_auto_partition_has_zero_excess(strip):
    eps_values = [1 / 8, 1 / 16, 1 / 32]
    sweep = certify_sweep(
        lambda e: rotation_pair(strip, e, cut=2.0), model(1 / 8), eps_values
    )
    assert sweep.all_ok
    for row in sweep.rows:
        assert row.certificate.partition_excess == 0.0
        assert row.certificate.n_grains == 2
        assert row.relaxed_total == pytest.approx(1.0)  # kappa * cut length


def test_sweep_requires_eps_values(strip):
    with pytest.raises(RigidityError, match="at least one"):
        certify_sweep(lambda e: identity_field(strip), model(0.1), [])


def test_loglog_slope_recovers_power_law():
    eps = np.array([0.1, 0.05, 0.025, 0.0125])
    assert loglog_slope(eps, 3.7 * eps**1.5) == pytest.approx(1.5)
    assert loglog_slope(eps, np.zeros(4)) == 0.0
    # a single positive entry cannot define a slope
    assert loglog_slope(eps, [1.0, 0.0, 0.0, 0.0]) == 0.0


# ---------------------------------------------------------------------------
# limit strain comparison
# ---------------------------------------------------------------------------


def test_compare_limit_strains_affine_pieces(strip):
    A = np.array([[0.0, -1.0], [1.0, 0.0]])
    u1 = affine_step_displacement(strip, 2.0, matrix=A)
    u2 = affine_step_displacement(strip, 2.0, matrix=A)
    assert compare_limit_strains(u1, u2) == 0.0


def test_compare_limit_strains_sees_differences(strip):
    zero = DisplacementJet(
        strip, np.zeros((strip.n_cells, 2)), np.zeros((strip.n_cells, 2, 2))
    )
    B = np.array([[0.3, 0.0], [0.0, 0.0]])
    u = affine_step_displacement(strip, 2.0, matrix=B)
    # strain differs by sym B = B on the right piece
    assert compare_limit_strains(zero, u) == pytest.approx(0.3)


def test_compare_limit_strains_excludes_blowup_cells(strip):
    n = strip.n_cells
    grads = np.zeros((n, 2, 2))
    bad = strip.inner_mask().nonzero()[0][0]
    grads[bad, 0, 0] = 1e9
    mask = np.zeros(n, dtype=bool)
    mask[bad] = True
    u1 = DisplacementJet(strip, np.zeros((n, 2)), grads, blowup_mask=mask)
    u2 = DisplacementJet(strip, np.zeros((n, 2)), np.zeros((n, 2, 2)))
    assert compare_limit_strains(u1, u2) == 0.0


def test_compare_limit_strains_demands_common_grid(strip):
    other = Grid(outer=((0, 1), (0, 1)), inner=((0.25, 0.75), (0.25, 0.75)), cell_size=0.125)
    u1 = DisplacementJet(strip, np.zeros((strip.n_cells, 2)), np.zeros((strip.n_cells, 2, 2)))
    u2 = DisplacementJet(other, np.zeros((other.n_cells, 2)), np.zeros((other.n_cells, 2, 2)))
    with pytest.raises(RigidityError, match="grid"):
        compare_limit_strains(u1, u2)
