"""Desk-scale minimization of the nonlinear and linearized energies.

The jet discretization is a discontinuous-Galerkin-style scheme: every inner
cell carries an affine jet ``(a_c, F_c)`` as unknowns, frame cells are frozen
to the Dirichlet datum, and interior-penalty terms couple neighbouring jets
across every facet not contained in the prescribed crack.  Cracks are never
discovered: a scenario declares a finite :class:`CrackFamily`, each candidate
is solved with the crack frozen, and the reported minimum is the best
candidate (brute force, deterministic tie-breaking).

The nonlinear solve uses a constant-metric quasi-Newton iteration: the metric
is the exact Hessian of the quadratic part (penalty + second gradient) plus a
Gauss-Newton proxy for the elastic term, factorized once per candidate, with
Armijo backtracking and three deterministic multi-starts to hedge the
nonconvexity of the elastic density.  The linearized solve is a single
symmetric positive-definite system, solved by preconditioned conjugate
gradients (or a dense direct factorization, kept as an oracle for tests).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

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
    FacetSet,
    Grid,
    JetField,
    zero_boundary,
)
from .rotations import rotation_2d


class MinimizeError(ValueError):
    """Raised for ill-posed minimization inputs."""


# ---------------------------------------------------------------------------
# crack families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CrackFamily:
    """A finite list of candidate crack sets, always containing the empty one.

    Candidates must consist of facets between two inner cells; the frame and
    its attachment facets can never be cracked.
    """

    candidates: tuple

    def __post_init__(self):
        cands = tuple(frozenset(c) for c in self.candidates)
        if not cands:
            raise MinimizeError("crack family must be nonempty")
        if frozenset() not in cands:
            raise MinimizeError("crack family must contain the empty crack")
        object.__setattr__(self, "candidates", cands)

    def validate(self, grid: Grid) -> None:
        allowed = grid.inner_facets()
        problems = []
        for k, cand in enumerate(self.candidates):
            stray = sorted(cand - allowed)
            if stray:
                problems.append(
                    f"candidate {k} contains non-inner facets: {stray[:3]}"
                )
        if problems:
            raise MinimizeError("; ".join(problems))

    def __len__(self) -> int:
        return len(self.candidates)


@dataclass(frozen=True)
class SolverOptions:
    """Tuning knobs for the fixed-crack solves (defaults match the tests)."""

    max_iter: int = 5000
    tol_scale: float = 1.0e-8
    ftol: float = 1.0e-9
    armijo: float = 1.0e-4
    backtrack: float = 0.5
    min_step: float = 1.0e-14
    multistarts: int = 3
    perturb_angle: float = 0.1
    penalty_factor: float = 1.0e3
    anchor: float = 1.0e-10
    cg_rtol: float = 1.0e-10
    cg_maxiter: int = 20000


@dataclass(frozen=True)
class MinimizationResult:
    """Outcome of one fixed-crack solve (or of a family search).

    ``field`` is a :class:`JetField` for nonlinear solves and a
    :class:`DisplacementJet` for linearized solves.  ``report`` is always a
    fresh re-evaluation of ``field`` by the energy module, so the round-trip
    invariant (reported energy == energy of the stored field) holds by
    construction and is asserted in tests.
    """

    crack: FacetSet
    field: object
    report: EnergyReport
    iterations: int
    grad_norm: float
    multistart_index: int
    converged: bool
    penalty_residual: float = 0.0
    candidate_index: int = -1

    @property
    def energy(self) -> float:
        total = self.report.total
        return math.inf if total is None else float(total)


# ---------------------------------------------------------------------------
# sparse structure assembly
# ---------------------------------------------------------------------------


@dataclass
class _Discretization:
    """Geometry-and-crack-dependent sparse operators in packed coordinates.

    Packing: cell ``c`` owns ``d + d^2`` consecutive entries, the value
    ``a_c`` first, then the gradient ``F_c`` row-major.  ``select_dof`` maps
    the reduced unknown vector (inner cells only) into the full vector.
    """

    grid: Grid
    crack: FacetSet
    jump_matrix: sp.csr_matrix  # facet trace jumps, rows of size d
    grad_jump_matrix: sp.csr_matrix  # facet gradient jumps, rows of size d^2
    second_diff: sp.csr_matrix  # per-cell gradient differences
    select_dof: sp.csr_matrix  # (N_full, N_dof)
    dof_cells: np.ndarray
    f_component_mask: np.ndarray  # True at gradient entries of the packing


def _cell_block(d: int) -> int:
    return d + d * d


def _open_facet_masks(grid: Grid, crack: FacetSet) -> list[np.ndarray]:
    crack_masks = grid.facet_masks(crack)
    return [~m for m in crack_masks]


def _assemble_discretization(grid: Grid, crack: FacetSet) -> _Discretization:
    d = grid.dim
    h = grid.cell_size
    nb = _cell_block(d)
    n = grid.n_cells
    strides = [int(np.prod(grid.shape[a + 1 :], dtype=int)) for a in range(d)]
    open_masks = _open_facet_masks(grid, crack)

    def f_col(cells: np.ndarray, i: int, j: int) -> np.ndarray:
        return cells * nb + d + i * d + j

    def a_col(cells: np.ndarray, i: int) -> np.ndarray:
        return cells * nb + i

    # --- facet jump operators ------------------------------------------------
    rows_j, cols_j, data_j = [], [], []
    rows_g, cols_g, data_g = [], [], []
    row_j = 0
    row_g = 0
    for axis in range(d):
        mask = open_masks[axis]
        idx = np.argwhere(mask)
        if idx.size == 0:
            continue
        lo_cells = np.ravel_multi_index(idx.T, grid.shape)
        hi_cells = lo_cells + strides[axis]
        m = len(lo_cells)
        for i in range(d):
            r = row_j + np.arange(m) * d + i
            rows_j.extend([r, r, r, r])
            cols_j.extend(
                [
                    a_col(hi_cells, i),
                    a_col(lo_cells, i),
                    f_col(hi_cells, i, axis),
                    f_col(lo_cells, i, axis),
                ]
            )
            data_j.extend(
                [
                    np.full(m, 1.0),
                    np.full(m, -1.0),
                    np.full(m, -0.5 * h),
                    np.full(m, -0.5 * h),
                ]
            )
        for i in range(d):
            for j in range(d):
                r = row_g + np.arange(m) * d * d + i * d + j
                rows_g.extend([r, r])
                cols_g.extend([f_col(hi_cells, i, j), f_col(lo_cells, i, j)])
                data_g.extend([np.full(m, 1.0), np.full(m, -1.0)])
        row_j += m * d
        row_g += m * d * d
    n_full = n * nb

    def _csr(rows, cols, data, shape):
        if rows:
            rows = np.concatenate(rows)
            cols = np.concatenate(cols)
            data = np.concatenate(data)
        else:
            rows = cols = data = np.zeros(0)
        return sp.csr_matrix((data, (rows, cols)), shape=shape)

    B_j = _csr(rows_j, cols_j, data_j, (row_j, n_full))
    B_g = _csr(rows_g, cols_g, data_g, (row_g, n_full))

    # --- second-difference operator (mirrors fields._second_differences) ----
    rows_l, cols_l, data_l = [], [], []
    cells_nd = np.arange(n).reshape(grid.shape)
    for axis in range(d):
        mask = open_masks[axis]
        has_fwd = np.zeros(grid.shape, dtype=bool)
        has_bwd = np.zeros(grid.shape, dtype=bool)
        sl_lo = tuple(slice(0, -1) if a == axis else slice(None) for a in range(d))
        sl_hi = tuple(slice(1, None) if a == axis else slice(None) for a in range(d))
        has_fwd[sl_lo] = mask
        has_bwd[sl_hi] = mask
        both = cells_nd[has_fwd & has_bwd].ravel()
        fwd = cells_nd[has_fwd & ~has_bwd].ravel()
        bwd = cells_nd[has_bwd & ~has_fwd].ravel()
        for i in range(d):
            for j in range(d):
                comp = (i * d + j) * d + axis

                def l_row(cells):
                    return cells * (d * d * d) + comp

                if both.size:
                    r = l_row(both)
                    rows_l.extend([r, r])
                    cols_l.extend(
                        [f_col(both + strides[axis], i, j), f_col(both - strides[axis], i, j)]
                    )
                    data_l.extend(
                        [np.full(both.size, 0.5 / h), np.full(both.size, -0.5 / h)]
                    )
                if fwd.size:
                    r = l_row(fwd)
                    rows_l.extend([r, r])
                    cols_l.extend([f_col(fwd + strides[axis], i, j), f_col(fwd, i, j)])
                    data_l.extend(
                        [np.full(fwd.size, 1.0 / h), np.full(fwd.size, -1.0 / h)]
                    )
                if bwd.size:
                    r = l_row(bwd)
                    rows_l.extend([r, r])
                    cols_l.extend([f_col(bwd, i, j), f_col(bwd - strides[axis], i, j)])
                    data_l.extend(
                        [np.full(bwd.size, 1.0 / h), np.full(bwd.size, -1.0 / h)]
                    )
    L = _csr(rows_l, cols_l, data_l, (n * d * d * d, n_full))

    # --- unknown selection ---------------------------------------------------
    dof_cells = np.flatnonzero(grid.inner_mask())
    cols = (dof_cells[:, None] * nb + np.arange(nb)[None, :]).ravel()
    n_dof = cols.size
    select = sp.csr_matrix(
        (np.ones(n_dof), (cols, np.arange(n_dof))), shape=(n_full, n_dof)
    )
    f_mask = np.zeros(n_full, dtype=bool)
    for c in range(n):
        f_mask[c * nb + d : (c + 1) * nb] = True
    return _Discretization(
        grid=grid,
        crack=frozenset(crack),
        jump_matrix=B_j,
        grad_jump_matrix=B_g,
        second_diff=L,
        select_dof=select,
        dof_cells=dof_cells,
        f_component_mask=f_mask,
    )


def _pack_field(grid: Grid, values: np.ndarray, grads: np.ndarray) -> np.ndarray:
    d = grid.dim
    nb = _cell_block(d)
    x = np.empty(grid.n_cells * nb)
    x.reshape(grid.n_cells, nb)[:, :d] = values
    x.reshape(grid.n_cells, nb)[:, d:] = grads.reshape(grid.n_cells, d * d)
    return x


def _unpack_field(grid: Grid, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = grid.dim
    nb = _cell_block(d)
    m = x.reshape(grid.n_cells, nb)
    return m[:, :d].copy(), m[:, d:].reshape(grid.n_cells, d, d).copy()


def _boundary_deformation(
    grid: Grid, model: EnergyModel, h_bc: BoundaryDatum
) -> tuple[np.ndarray, np.ndarray]:
    """Values and gradients of ``g = id + eps*h`` at every cell center."""
    x = grid.cell_centers()
    d = grid.dim
    values = x + model.eps * np.asarray(h_bc.value(x), dtype=float)
    grads = np.broadcast_to(np.eye(d), (grid.n_cells, d, d)).copy()
    grads += model.eps * np.asarray(h_bc.grad(x), dtype=float)
    return values, grads


def _penalty_weights(model: EnergyModel, options: SolverOptions, linearized: bool):
    if linearized:
        eta = options.penalty_factor
        eta_grad = options.penalty_factor
    else:
        eta = options.penalty_factor * max(model.eps**-2, 1.0)
        eta_grad = options.penalty_factor * max(model.eps ** (-2 * model.beta), 1.0)
    return eta, eta_grad


def _penalty_hessian(
    disc: _Discretization, eta: float, eta_grad: float
) -> sp.csr_matrix:
    grid = disc.grid
    scale = grid.cell_size ** (grid.dim - 2)
    B_j, B_g = disc.jump_matrix, disc.grad_jump_matrix
    return (2.0 * eta * scale) * (B_j.T @ B_j) + (2.0 * eta_grad * scale) * (
        B_g.T @ B_g
    )


# ---------------------------------------------------------------------------
# nonlinear fixed-crack solve
# ---------------------------------------------------------------------------


def solve_fixed_crack_nonlinear(
    model: EnergyModel,
    grid: Grid,
    crack: FacetSet,
    h_bc: BoundaryDatum | None = None,
    options: SolverOptions | None = None,
) -> MinimizationResult:
    """Minimize the (relaxed) nonlinear energy over inner jets, crack frozen.

    The frame is held at ``g = id + eps*h``; the crack facets carry no
    coupling, all other facets are tied by the interior penalty.  The
    reported energy is a re-evaluation of the assembled field by
    :func:`jetfrac.energy.nonlinear_energy` (penalty excluded), so it is the
    honest energy of the returned jet field.
    """
    if options is None:
        options = SolverOptions()
    if h_bc is None:
        h_bc = zero_boundary()
    crack = frozenset(crack)
    allowed = grid.inner_facets()
    if not crack <= allowed:
        raise MinimizeError("crack contains facets outside the inner region")
    d = grid.dim
    h = grid.cell_size
    hd = h**d
    disc = _assemble_discretization(grid, crack)
    eta, eta_grad = _penalty_weights(model, options, linearized=False)
    A_pen = _penalty_hessian(disc, eta, eta_grad)
    sg_scale = model.eps ** (-2.0 * model.beta) * hd
    L = disc.second_diff
    A_quad = A_pen + (2.0 * sg_scale) * (L.T @ L)
    E = disc.select_dof
    surface_const = model.kappa * len(crack) * h ** (d - 1)
    el_scale = model.eps**-2 * hd
    density = model.density

    g_values, g_grads = _boundary_deformation(grid, model, h_bc)
    x_full0 = _pack_field(grid, g_values, g_grads)
    frame_part = x_full0 - E @ (E.T @ x_full0)

    def objective(x_dof: np.ndarray) -> float:
        x = frame_part + E @ x_dof
        _, F = _unpack_field(grid, x)
        w_sum = float(np.sum(density.w(F)))
        return el_scale * w_sum + 0.5 * float(x @ (A_quad @ x)) + surface_const

    def gradient(x_dof: np.ndarray) -> np.ndarray:
        x = frame_part + E @ x_dof
        _, F = _unpack_field(grid, x)
        dW = density.grad(F)
        g_full = A_quad @ x
        g_full[disc.f_component_mask] += el_scale * dW.reshape(-1)
        return E.T @ g_full

    # constant quasi-Newton metric: exact quadratic part + the Hessian of the
    # default well at the identity (2*P_sym, i.e. I + transposition on the
    # gradient entries) for the elastic term, anchored for safety.  Using the
    # full symmetrizer instead of a diagonal proxy matters: a diagonal 2/eps^2
    # overestimates the curvature of skew perturbations (which is zero) and
    # stalls the descent in those directions.
    n_dof = E.shape[1]
    nb = _cell_block(d)
    cells = np.arange(grid.n_cells)
    rows_t = np.concatenate(
        [cells * nb + d + i * d + j for i in range(d) for j in range(d)]
    )
    cols_t = np.concatenate(
        [cells * nb + d + j * d + i for i in range(d) for j in range(d)]
    )
    n_full = grid.n_cells * nb
    gn = sp.coo_matrix(
        (np.full(rows_t.size, el_scale), (rows_t, cols_t)), shape=(n_full, n_full)
    ) + sp.diags(np.where(disc.f_component_mask, el_scale, 0.0))
    H = (E.T @ ((A_quad + gn) @ E)).tocsc() + options.anchor * sp.identity(
        n_dof, format="csc"
    )
    metric = splu(H)

    def run_descent(x0: np.ndarray, tol_g: float):
        x = x0.copy()
        f = objective(x)
        if not np.isfinite(f):
            raise MinimizeError("energy is not finite at the starting point")
        g = gradient(x)
        it = 0
        while it < options.max_iter:
            gnorm = float(np.linalg.norm(g))
            if gnorm <= tol_g:
                return x, f, gnorm, it, True
            p = -metric.solve(g)
            slope = float(g @ p)
            if slope >= 0.0:  # metric breakdown; fall back to steepest descent
                p = -g
                slope = -gnorm**2
            t = 1.0
            while True:
                f_new = objective(x + t * p)
                if f_new <= f + options.armijo * t * slope:
                    break
                t *= options.backtrack
                if t < options.min_step:
                    return x, f, gnorm, it, False
            decrease = f - f_new
            x = x + t * p
            g = gradient(x)
            it += 1
            # Relative-decrease stop: once the objective no longer moves at
            # double precision the gradient norm has hit its attainable floor
            # (the stiff penalty eigenvalues put that floor well above any
            # fixed small tolerance), so further iterations cannot help.
            if decrease <= options.ftol * max(abs(f), abs(f_new), 1.0):
                return x, f_new, float(np.linalg.norm(g)), it, True
            f = f_new
        return x, f, float(np.linalg.norm(g)), it, False

    # deterministic multi-starts: the boundary extension itself, then the
    # inner jets spun by a small global rotation either way.
    starts = [E.T @ x_full0]
    center = np.asarray([0.5 * (lo + hi) for lo, hi in grid.outer])
    for sign in (1.0, -1.0):
        if len(starts) >= options.multistarts:
            break
        R = np.eye(d)
        R[:2, :2] = rotation_2d(sign * options.perturb_angle)
        vals = center + (g_values - center) @ R.T
        grads = np.einsum("ij,njk->nik", R, g_grads)
        starts.append(E.T @ _pack_field(grid, vals, grads))

    tol_g = options.tol_scale * max(1.0, float(np.linalg.norm(gradient(starts[0]))))
    best = None
    for k, x0 in enumerate(starts[: options.multistarts]):
        x, f, gnorm, it, ok = run_descent(x0, tol_g)
        if best is None or f < best[1]:
            best = (x, f, gnorm, it, ok, k)
    x, f, gnorm, it, ok, k = best
    x_full = frame_part + E @ x
    values, grads = _unpack_field(grid, x_full)
    y = JetField(grid, values, grads, jump_values=crack, jump_grads=crack)
    report = nonlinear_energy(model, y, check=False)
    penalty = 0.5 * float(x_full @ (A_pen @ x_full))
    return MinimizationResult(
        crack=crack,
        field=y,
        report=report,
        iterations=it,
        grad_norm=gnorm,
        multistart_index=k,
        converged=bool(ok),
        penalty_residual=penalty,
    )


# ---------------------------------------------------------------------------
# linearized fixed-crack solve
# ---------------------------------------------------------------------------


def _cg_solve(A, b, x0, rtol, maxiter):
    from scipy.sparse.linalg import cg

    dia = A.diagonal().copy()
    dia[dia <= 0.0] = 1.0
    M = sp.diags(1.0 / dia)
    try:
        x, info = cg(A, b, x0=x0, M=M, rtol=rtol, maxiter=maxiter)
    except TypeError:  # older scipy spells the relative tolerance "tol"
        x, info = cg(A, b, x0=x0, M=M, tol=rtol, atol=0.0, maxiter=maxiter)
    return x, int(info)


def solve_fixed_crack_linear(
    model: EnergyModel,
    grid: Grid,
    crack: FacetSet,
    h_bc: BoundaryDatum | None = None,
    q: QuadraticForm | None = None,
    options: SolverOptions | None = None,
    method: str = "cg",
) -> MinimizationResult:
    """Minimize the linearized energy over inner displacement jets.

    The objective is quadratic, so the solve is a single SPD system.
    ``method="cg"`` uses Jacobi-preconditioned conjugate gradients to relative
    residual ``options.cg_rtol``; ``method="dense"`` is a direct dense solve
    retained as an oracle.
    """
    if options is None:
        options = SolverOptions()
    if h_bc is None:
        h_bc = zero_boundary()
    if q is None:
        q = hessian_quadratic_form(model, dim=grid.dim)
    if method not in ("cg", "dense"):
        raise MinimizeError(f"unknown linear solve method: {method!r}")
    crack = frozenset(crack)
    if not crack <= grid.inner_facets():
        raise MinimizeError("crack contains facets outside the inner region")
    d = grid.dim
    h = grid.cell_size
    nb = _cell_block(d)
    disc = _assemble_discretization(grid, crack)
    eta, eta_grad = _penalty_weights(model, options, linearized=True)
    A_pen = _penalty_hessian(disc, eta, eta_grad)

    # elastic block: (1/2) Q(sym F) h^d per cell, as a quadratic in vec(F)
    sym_op = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            sym_op[i * d + j, i * d + j] += 0.5
            sym_op[i * d + j, j * d + i] += 0.5
    block = np.zeros((nb, nb))
    block[d:, d:] = h**d * (sym_op.T @ q.matrix @ sym_op)
    A_el = sp.block_diag([sp.csr_matrix(block)] * grid.n_cells, format="csr")
    A = (A_el + A_pen).tocsr()

    x = grid.cell_centers()
    h_values = np.asarray(h_bc.value(x), dtype=float)
    h_grads = np.asarray(h_bc.grad(x), dtype=float)
    x_full0 = _pack_field(grid, h_values, h_grads)
    E = disc.select_dof
    frame_part = x_full0 - E @ (E.T @ x_full0)
    A_dof = (E.T @ (A @ E)).tocsc()
    b = -(E.T @ (A @ frame_part))

    if method == "dense":
        sol = np.linalg.solve(A_dof.toarray(), b)
        info = 0
        iterations = 1
    else:
        sol, info = _cg_solve(
            A_dof.tocsr(), b, E.T @ x_full0, options.cg_rtol, options.cg_maxiter
        )
        iterations = -1 if info == 0 else info
    x_full = frame_part + E @ sol
    values, grads = _unpack_field(grid, x_full)
    u = DisplacementJet(grid, values, grads, jumps=crack)
    report = linear_energy(model, q, u, check=False)
    residual = float(np.linalg.norm(A_dof @ sol - b))
    bnorm = float(np.linalg.norm(b))
    converged = info == 0 and (bnorm == 0.0 or residual <= 1e-6 * max(bnorm, 1.0))
    penalty = 0.5 * float(x_full @ (A_pen @ x_full))
    return MinimizationResult(
        crack=crack,
        field=u,
        report=report,
        iterations=max(iterations, 0),
        grad_norm=residual,
        multistart_index=0,
        converged=bool(converged),
        penalty_residual=penalty,
    )


# ---------------------------------------------------------------------------
# brute force over crack candidates
# ---------------------------------------------------------------------------


def solve_crack_family(
    model: EnergyModel,
    grid: Grid,
    family: CrackFamily,
    which: str = "nonlinear",
    h_bc: BoundaryDatum | None = None,
    q: QuadraticForm | None = None,
    options: SolverOptions | None = None,
) -> list[MinimizationResult]:
    """Run the fixed-crack solve for every candidate, in declaration order."""
    if which not in ("nonlinear", "linear"):
        raise MinimizeError(f"unknown minimization kind: {which!r}")
    family.validate(grid)
    results = []
    for idx, crack in enumerate(family.candidates):
        if which == "nonlinear":
            res = solve_fixed_crack_nonlinear(model, grid, crack, h_bc, options)
        else:
            res = solve_fixed_crack_linear(model, grid, crack, h_bc, q, options)
        results.append(
            MinimizationResult(
                crack=res.crack,
                field=res.field,
                report=res.report,
                iterations=res.iterations,
                grad_norm=res.grad_norm,
                multistart_index=res.multistart_index,
                converged=res.converged,
                penalty_residual=res.penalty_residual,
                candidate_index=idx,
            )
        )
    return results


def select_best(results) -> MinimizationResult:
    """Deterministic argmin over candidate results.

    Ties (energies equal to within ``1e-12`` relative) are broken toward
    fewer crack facets, then toward the earlier candidate.
    """
    results = list(results)
    if not results:
        raise MinimizeError("no candidate results to select from")
    best = results[0]
    for res in results[1:]:
        # an infinite incumbent has an empty tie window, otherwise inf - inf
        # would poison the strict comparison and pin the first candidate
        if math.isfinite(best.energy):
            tie = 1e-12 * max(1.0, abs(best.energy))
        else:
            tie = 0.0
        if res.energy < best.energy - tie:
            best = res
        elif abs(res.energy - best.energy) <= tie and len(res.crack) < len(best.crack):
            best = res
    return best


def minimize_over_cracks(
    model: EnergyModel,
    grid: Grid,
    family: CrackFamily,
    which: str = "nonlinear",
    h_bc: BoundaryDatum | None = None,
    q: QuadraticForm | None = None,
    options: SolverOptions | None = None,
) -> MinimizationResult:
    """Solve every crack candidate and return the best result."""
    return select_best(
        solve_crack_family(model, grid, family, which, h_bc, q, options)
    )


# ---------------------------------------------------------------------------
# convergence of minima
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MinimaRow:
    """One scale of the minima-convergence sweep."""

    eps: float
    nonlinear_energy: float
    linear_energy: float
    gap: float
    strain_discrepancy: float
    nonlinear_crack: FacetSet
    linear_crack: FacetSet
    cracks_agree: bool
    flagged: bool


@dataclass(frozen=True)
class MinimaSweep:
    """Nonlinear family minima against the single linearized minimum."""

    rows: tuple
    linear_result: MinimizationResult

    def gaps(self) -> list[float]:
        return [r.gap for r in self.rows]

    @property
    def gaps_decreasing(self) -> bool:
        g = [abs(r.gap) for r in self.rows]
        return all(b <= a for a, b in zip(g, g[1:]))

    @property
    def any_flagged(self) -> bool:
        return any(r.flagged for r in self.rows)


def minima_convergence_sweep(
    model: EnergyModel,
    grid: Grid,
    family: CrackFamily,
    eps_values,
    h_bc: BoundaryDatum | None = None,
    q: QuadraticForm | None = None,
    options: SolverOptions | None = None,
) -> MinimaSweep:
    """Minimize the nonlinear energy per scale and compare with the limit.

    For each ``eps`` (expected decreasing) the nonlinear family minimum is
    computed, the minimizer is pushed through the rigidity pipeline
    (partition, rotations, rescale) to extract a limiting displacement, and
    that displacement's strain is compared cell-by-cell against the
    linearized family minimizer.
    """
    from .rigidity import (
        coarea_partition,
        compare_limit_strains,
        fit_rotations,
        piecewise_rotate,
        rescale_displacement,
    )

    if q is None:
        q = hessian_quadratic_form(model, dim=grid.dim)
    lin = minimize_over_cracks(
        model, grid, family, which="linear", h_bc=h_bc, q=q, options=options
    )
    rows = []
    for eps in eps_values:
        m = model.with_eps(float(eps))
        nl = minimize_over_cracks(
            m, grid, family, which="nonlinear", h_bc=h_bc, options=options
        )
        part = fit_rotations(coarea_partition(nl.field, m))
        u_eps = rescale_displacement(piecewise_rotate(nl.field, part), m)
        disc = compare_limit_strains(u_eps, lin.field)
        rows.append(
            MinimaRow(
                eps=float(eps),
                nonlinear_energy=nl.energy,
                linear_energy=lin.energy,
                gap=nl.energy - lin.energy,
                strain_discrepancy=disc,
                nonlinear_crack=nl.crack,
                linear_crack=lin.crack,
                cracks_agree=nl.crack == lin.crack,
                flagged=not (nl.converged and lin.converged),
            )
        )
    return MinimaSweep(rows=tuple(rows), linear_result=lin)
