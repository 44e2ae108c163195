"""Fixed-crack solves, crack-family search and minima convergence."""

import numpy as np
import pytest

from jetfrac.energy import EnergyModel, EnergyReport, linear_energy, make_density, nonlinear_energy
from jetfrac.energy import hessian_quadratic_form
from jetfrac.fields import Grid
from jetfrac.minimize import (
    CrackFamily,
    MinimizationResult,
    MinimizeError,
    SolverOptions,
    minima_convergence_sweep,
    minimize_over_cracks,
    select_best,
    solve_crack_family,
    solve_fixed_crack_linear,
    solve_fixed_crack_nonlinear,
)
from jetfrac.presets import stretch_boundary, stretch_skew_boundary


def model(eps=0.1, kappa=0.5):
    return EnergyModel(
        density=make_density("so_distance"), eps=eps, beta=0.8, gamma=0.7, kappa=kappa
    )


@pytest.fixture
def grid():
    return Grid(outer=((0, 1), (0, 1)), inner=((0.25, 0.75), (0.25, 0.75)), cell_size=0.125)


def mid_cut(grid):
    return grid.facet_plane(0, 0.5, bounds=((0.25, 0.75),))


# ---------------------------------------------------------------------------
# crack families
# ---------------------------------------------------------------------------


def test_crack_family_requires_empty_candidate(grid):
    with pytest.raises(MinimizeError, match="nonempty"):
        CrackFamily(candidates=())
    with pytest.raises(MinimizeError, match="empty crack"):
        CrackFamily(candidates=(mid_cut(grid),))
    fam = CrackFamily(candidates=(frozenset(), mid_cut(grid)))
    assert len(fam) == 2
    assert all(isinstance(c, frozenset) for c in fam.candidates)


def test_crack_family_validate_rejects_frame_facets(grid):
    outermost = grid.facet_plane(0, 0.125)  # between frame cells
    fam = CrackFamily(candidates=(frozenset(), outermost))
    with pytest.raises(MinimizeError, match="non-inner"):
        fam.validate(grid)
    CrackFamily(candidates=(frozenset(), mid_cut(grid))).validate(grid)


# ---------------------------------------------------------------------------
# nonlinear fixed-crack solve
# ---------------------------------------------------------------------------


def test_nonlinear_zero_datum_returns_identity(grid):
    res = solve_fixed_crack_nonlinear(model(), grid, frozenset())
    assert res.converged
    assert res.energy == pytest.approx(0.0, abs=1e-10)
    x = grid.cell_centers()
    assert np.allclose(res.field.values, x, atol=1e-7)
    assert np.allclose(res.field.grads, np.eye(2), atol=1e-7)


def test_nonlinear_reported_energy_is_field_energy(grid):
    m = model()
    res = solve_fixed_crack_nonlinear(m, grid, frozenset(), h_bc=stretch_skew_boundary(0.3, 0.5))
    again = nonlinear_energy(m, res.field, check=False)
    assert res.report.total == again.total
    assert res.energy == res.report.total
    assert res.converged
    assert res.energy > 0.0


def test_nonlinear_frame_is_pinned(grid):
    m = model()
    h = stretch_boundary(0.3)
    res = solve_fixed_crack_nonlinear(m, grid, frozenset(), h_bc=h)
    frame = ~grid.inner_mask()
    x = grid.cell_centers()
    g_val = x + m.eps * h.value(x)
    assert np.allclose(res.field.values[frame], g_val[frame], atol=1e-12)
    g_grad = np.eye(2) + m.eps * h.grad(x)
    assert np.allclose(res.field.grads[frame], g_grad[frame], atol=1e-12)


def test_nonlinear_rejects_frame_crack(grid):
    with pytest.raises(MinimizeError, match="inner"):
        solve_fixed_crack_nonlinear(model(), grid, grid.facet_plane(0, 0.125))


def test_nonlinear_crack_relieves_elastic_energy(grid):
    m = model(kappa=0.05)
    h = stretch_skew_boundary(0.3, 0.5)
    whole = solve_fixed_crack_nonlinear(m, grid, frozenset(), h_bc=h)
    cracked = solve_fixed_crack_nonlinear(m, grid, mid_cut(grid), h_bc=h)
    assert cracked.report.elastic < whole.report.elastic
    assert cracked.report.surface == pytest.approx(m.kappa * 0.5)  # 4 facets of h=1/8
    assert cracked.converged and whole.converged


def test_nonlinear_solve_is_deterministic(grid):
    m = model()
    h = stretch_skew_boundary(0.3, 0.5)
    r1 = solve_fixed_crack_nonlinear(m, grid, mid_cut(grid), h_bc=h)
    r2 = solve_fixed_crack_nonlinear(m, grid, mid_cut(grid), h_bc=h)
    assert r1.energy == r2.energy
    assert np.array_equal(r1.field.values, r2.field.values)
    assert np.array_equal(r1.field.grads, r2.field.grads)
    assert r1.multistart_index == r2.multistart_index


def test_nonlinear_penalty_residual_is_small(grid):
    res = solve_fixed_crack_nonlinear(model(), grid, frozenset(), h_bc=stretch_boundary(0.3))
    assert res.penalty_residual <= 1e-3 * max(res.energy, 1.0)


# ---------------------------------------------------------------------------
# linearized fixed-crack solve
# ---------------------------------------------------------------------------


def test_linear_zero_datum_is_zero(grid):
    res = solve_fixed_crack_linear(model(), grid, frozenset())
    assert res.converged
    assert res.energy == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(res.field.values, 0.0, atol=1e-10)


def test_linear_cg_matches_dense_oracle(grid):
    m = model()
    h = stretch_skew_boundary(0.3, 0.5)
    cg = solve_fixed_crack_linear(m, grid, mid_cut(grid), h_bc=h, method="cg")
    dense = solve_fixed_crack_linear(m, grid, mid_cut(grid), h_bc=h, method="dense")
    assert cg.energy == pytest.approx(dense.energy, rel=1e-8)
    assert np.allclose(cg.field.values, dense.field.values, atol=1e-7)


def test_linear_energy_bounded_by_affine_competitor(grid):
    # the affine extension of the datum is admissible with zero penalty, so
    # the discrete minimum cannot exceed its elastic energy
    m = model()
    t = 0.3
    res = solve_fixed_crack_linear(m, grid, frozenset(), h_bc=stretch_boundary(t))
    assert res.converged
    affine_energy = 2 * t * t / 2  # (1/2) Q(sym B) * |outer|, Q = 2|sym|^2
    assert res.energy <= affine_energy * (1 + 1e-9)
    assert res.energy >= 0.5 * affine_energy


def test_linear_reported_energy_is_field_energy(grid):
    m = model()
    q = hessian_quadratic_form(m, dim=2)
    res = solve_fixed_crack_linear(m, grid, mid_cut(grid), h_bc=stretch_boundary(0.3), q=q)
    again = linear_energy(m, q, res.field, check=False)
    assert res.report.total == again.total
    assert res.field.jumps == mid_cut(grid)


def test_linear_unknown_method_rejected(grid):
    with pytest.raises(MinimizeError, match="method"):
        solve_fixed_crack_linear(model(), grid, frozenset(), method="lu")


# ---------------------------------------------------------------------------
# family search
# ---------------------------------------------------------------------------


def test_solve_crack_family_orders_and_indexes(grid):
    m = model()
    fam = CrackFamily(candidates=(frozenset(), mid_cut(grid)))
    results = solve_crack_family(m, grid, fam, which="linear", h_bc=stretch_boundary(0.3))
    assert [r.candidate_index for r in results] == [0, 1]
    assert results[0].crack == frozenset()
    assert results[1].crack == mid_cut(grid)
    with pytest.raises(MinimizeError, match="kind"):
        solve_crack_family(m, grid, fam, which="newton")


def test_minimize_over_cracks_picks_lower_total(grid):
    # with a tiny kappa the cracked competitor beats the elastic one
    m = model(kappa=1e-4)
    h = stretch_skew_boundary(0.3, 0.5)
    fam = CrackFamily(candidates=(frozenset(), mid_cut(grid)))
    best = minimize_over_cracks(m, grid, fam, which="linear", h_bc=h)
    results = solve_crack_family(m, grid, fam, which="linear", h_bc=h)
    assert best.energy == min(r.energy for r in results)


def _fake_result(energy, crack_size, index):
    rep = EnergyReport(energy, 0.0, 0.0, True, True)
    return MinimizationResult(
        crack=frozenset((0, 0, k) for k in range(crack_size)),
        field=None,
        report=rep,
        iterations=0,
        grad_norm=0.0,
        multistart_index=0,
        converged=True,
        candidate_index=index,
    )


def test_select_best_tie_breaking():
    a = _fake_result(1.0, crack_size=3, index=0)
    b = _fake_result(1.0 + 1e-15, crack_size=1, index=1)
    assert select_best([a, b]) is b  # tie -> fewer facets
    c = _fake_result(1.0, crack_size=1, index=0)
    d = _fake_result(1.0, crack_size=1, index=1)
    assert select_best([c, d]) is c  # full tie -> earlier candidate
    e = _fake_result(0.5, crack_size=4, index=1)
    assert select_best([a, e]) is e  # strictly lower energy wins outright
    with pytest.raises(MinimizeError, match="select"):
        select_best([])


def test_infinite_energy_candidates_lose():
    bad = MinimizationResult(
        crack=frozenset(),
        field=None,
        report=EnergyReport(1.0, 1.0, 0.0, False, False),
        iterations=0,
        grad_norm=0.0,
        multistart_index=0,
        converged=True,
    )
    good = _fake_result(5.0, crack_size=0, index=1)
    assert bad.energy == np.inf
    assert select_best([bad, good]) is good


# ---------------------------------------------------------------------------
# minima convergence
# ---------------------------------------------------------------------------


def test_minima_sweep_structure(grid):
    m = model(kappa=0.5)
    h = stretch_skew_boundary(0.3, 0.5)
    fam = CrackFamily(candidates=(frozenset(), mid_cut(grid)))
    sweep = minima_convergence_sweep(m, grid, fam, [0.1, 0.05], h_bc=h)
    assert len(sweep.rows) == 2
    assert [r.eps for r in sweep.rows] == [0.1, 0.05]
    for row in sweep.rows:
        assert row.gap == row.nonlinear_energy - row.linear_energy
        assert row.cracks_agree == (row.nonlinear_crack == row.linear_crack)
        assert not row.flagged
    assert sweep.gaps_decreasing
    assert not sweep.any_flagged
    assert sweep.rows[1].strain_discrepancy <= 0.05
    # halving eps roughly halves the linearization gap
    assert abs(sweep.rows[1].gap) < 0.75 * abs(sweep.rows[0].gap)


def test_gaps_decreasing_uses_magnitudes():
    rep = EnergyReport(0.0, 0.0, 0.0, True, True)
    lin = MinimizationResult(frozenset(), None, rep, 0, 0.0, 0, True)

    def row(eps, gap):
        from jetfrac.minimize import MinimaRow

        return MinimaRow(eps, gap, 0.0, gap, 0.0, frozenset(), frozenset(), True, False)

    from jetfrac.minimize import MinimaSweep

    up = MinimaSweep(rows=(row(0.1, -0.5), row(0.05, 0.6)), linear_result=lin)
    down = MinimaSweep(rows=(row(0.1, -0.5), row(0.05, 0.4)), linear_result=lin)
    assert not up.gaps_decreasing
    assert down.gaps_decreasing


def test_solver_options_are_frozen():
    opts = SolverOptions(max_iter=10)
    assert opts.max_iter == 10
    with pytest.raises(AttributeError):
        opts.max_iter = 20
