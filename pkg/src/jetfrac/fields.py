"""Grids, per-cell affine jets, declared jump facets, and discrete field ops.

The state of a deformation is a *jet field*: on every cell of a uniform grid
an affine jet ``x -> a_c + F_c (x - x_c)`` (value ``a_c``, gradient ``F_c`` at
the cell center ``x_c``), together with declared sets of jump facets for the
value and for the gradient.  Cracks and gradient discontinuities live only on
interior cell interfaces (facets), so jump sets are plain ``frozenset``s of
facet identifiers ``(axis, i, j[, k])`` naming the lower adjacent cell.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

Facet = tuple
FacetSet = frozenset

_ALIGN_RTOL = 1.0e-9


class FieldSpecError(ValueError):
    """Raised when a piecewise field specification cannot be sampled."""

    def __init__(self, problems: Sequence[str]):
        self.problems = tuple(problems)
        super().__init__("; ".join(self.problems))


class FieldValidationError(ValueError):
    """Raised when a jet field violates its declared compatibility."""


@dataclass(frozen=True)
class ToleranceConfig:
    """Compatibility tolerances for jet fields.

    ``trace`` bounds the facet-midpoint mismatch of adjacent jets (scaled by
    the cell size); ``gradient`` bounds the Frobenius mismatch of adjacent
    gradients.  The defaults are exact-arithmetic tolerances suited to
    piecewise-affine fields; curved fields need curvature-scaled values, see
    :func:`curvature_tolerance`.
    """

    trace: float = 1.0e-8
    gradient: float = 1.0e-8


def curvature_tolerance(grid: "Grid", hess_bound: float) -> ToleranceConfig:
    """Tolerances admitting the O(h^2) jet mismatch of a smooth field.

    ``hess_bound`` is a sup-norm bound on the second gradient of the sampled
    map.  Adjacent jets of a smooth map disagree by at most ``h^2/4 * hess``
    at the shared facet midpoint and by ``h * hess`` in gradient.
    """
    h = grid.cell_size
    return ToleranceConfig(
        trace=max(1.0e-8, 0.5 * h * hess_bound),
        gradient=max(1.0e-8, 2.0 * h * hess_bound),
    )


# ---------------------------------------------------------------------------
# grid geometry
# ---------------------------------------------------------------------------


def _as_box(box) -> tuple:
    return tuple((float(lo), float(hi)) for lo, hi in box)


@dataclass(frozen=True, eq=True)
class Grid:
    """Uniform cell grid on an outer box with an inner working region.

    The outer box discretises the full domain; the inner box marks the region
    whose cells carry unknowns, while cells of ``outer \\ inner`` form the
    boundary frame that Dirichlet data is imposed on.  Box extents must be
    integer multiples of ``cell_size`` and every axis must carry at least four
    cells; the inner box must be strictly contained on at least one face.

    Parameters
    ----------
    outer, inner : sequence of (lo, hi) pairs, one per axis
    cell_size : float
        Uniform cell edge length ``h``.
    """

    outer: tuple
    inner: tuple
    cell_size: float
    shape: tuple = field(init=False, compare=False)
    _centers: np.ndarray = field(init=False, compare=False, repr=False)
    _inner_mask: np.ndarray = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "outer", _as_box(self.outer))
        object.__setattr__(self, "inner", _as_box(self.inner))
        object.__setattr__(self, "cell_size", float(self.cell_size))
        problems = []
        h = self.cell_size
        if not h > 0.0:
            problems.append(f"cell_size must be positive, got {h}")
            raise FieldSpecError(problems)
        d = len(self.outer)
        if d not in (2, 3):
            problems.append(f"dimension must be 2 or 3, got {d}")
        if len(self.inner) != d:
            problems.append("outer and inner boxes have different dimensions")
        shape = []
        for ax, (lo, hi) in enumerate(self.outer):
            if not hi > lo:
                problems.append(f"outer box degenerate on axis {ax}: ({lo}, {hi})")
                continue
            n = (hi - lo) / h
            if abs(n - round(n)) > _ALIGN_RTOL * max(1.0, abs(n)):
                problems.append(
                    f"outer extent on axis {ax} is not an integer multiple of "
                    f"cell_size: ({hi} - {lo}) / {h} = {n}"
                )
            n = int(round(n))
            if n < 4:
                problems.append(f"axis {ax} has {n} cells; at least 4 required")
            shape.append(n)
        if not problems:
            strict = False
            for ax, ((olo, ohi), (ilo, ihi)) in enumerate(zip(self.outer, self.inner)):
                for name, val in (("lower", ilo), ("upper", ihi)):
                    k = (val - olo) / h
                    if abs(k - round(k)) > _ALIGN_RTOL * max(1.0, abs(k)):
                        problems.append(
                            f"inner box {name} bound {val} on axis {ax} is not "
                            "on a grid line"
                        )
                if ilo < olo - _ALIGN_RTOL * h or ihi > ohi + _ALIGN_RTOL * h:
                    problems.append(f"inner box exceeds the outer box on axis {ax}")
                if not ihi > ilo:
                    problems.append(f"inner box degenerate on axis {ax}")
                if ilo > olo + _ALIGN_RTOL * h or ihi < ohi - _ALIGN_RTOL * h:
                    strict = True
            if not strict:
                problems.append(
                    "inner box must be strictly contained in the outer box on "
                    "at least one face"
                )
        if problems:
            raise FieldSpecError(problems)
        object.__setattr__(self, "shape", tuple(shape))
        axes = [
            self.outer[ax][0] + h * (np.arange(shape[ax]) + 0.5) for ax in range(d)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        centers = np.stack([m.ravel() for m in mesh], axis=-1)
        centers.setflags(write=False)
        object.__setattr__(self, "_centers", centers)
        mask = np.ones(len(centers), dtype=bool)
        for ax in range(d):
            ilo, ihi = self.inner[ax]
            mask &= (centers[:, ax] > ilo) & (centers[:, ax] < ihi)
        mask.setflags(write=False)
        object.__setattr__(self, "_inner_mask", mask)

    # -- basic queries ------------------------------------------------------

    @property
    def dim(self) -> int:
        return len(self.outer)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    def cell_centers(self) -> np.ndarray:
        """Array of cell centers, shape ``(n_cells, d)`` (read-only)."""
        return self._centers

    def inner_mask(self) -> np.ndarray:
        """Boolean mask of cells inside the inner box, shape ``(n_cells,)``."""
        return self._inner_mask

    def outer_volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.outer]))

    # -- facets ---------------------------------------------------------------

    def facet_shape(self, axis: int) -> tuple:
        """Index shape of interior facets orthogonal to ``axis``."""
        s = list(self.shape)
        s[axis] -= 1
        return tuple(s)

    def is_interior_facet(self, f: Facet) -> bool:
        if len(f) != self.dim + 1:
            return False
        axis, *idx = f
        if not 0 <= axis < self.dim:
            return False
        fs = self.facet_shape(axis)
        return all(0 <= i < n for i, n in zip(idx, fs))

    def check_facets(self, facets: FacetSet) -> None:
        bad = sorted(f for f in facets if not self.is_interior_facet(f))
        if bad:
            raise FieldSpecError(
                [f"facet {f} is not an interior facet of the grid" for f in bad]
            )

    def facet_cells(self, f: Facet) -> tuple[int, int]:
        """Flat indices of the two cells adjacent to facet ``f`` (lower, upper)."""
        axis, *idx = f
        lo = np.ravel_multi_index(idx, self.shape)
        up_idx = list(idx)
        up_idx[axis] += 1
        up = np.ravel_multi_index(up_idx, self.shape)
        return int(lo), int(up)

    def facet_midpoint(self, f: Facet) -> np.ndarray:
        axis, *idx = f
        lo, _ = self.facet_cells(f)
        mid = self._centers[lo].copy()
        mid[axis] += 0.5 * self.cell_size
        return mid

    def facet_masks(self, facets: FacetSet) -> list[np.ndarray]:
        """Boolean presence mask per axis, shape ``facet_shape(axis)``."""
        masks = [np.zeros(self.facet_shape(ax), dtype=bool) for ax in range(self.dim)]
        for f in facets:
            axis, *idx = f
            masks[axis][tuple(idx)] = True
        return masks

    def facets_from_masks(self, masks: Sequence[np.ndarray]) -> FacetSet:
        out = []
        for axis, m in enumerate(masks):
            for idx in zip(*np.nonzero(m)):
                out.append((axis,) + tuple(int(i) for i in idx))
        return frozenset(out)

    def facet_plane(self, axis: int, coordinate: float, bounds=None) -> FacetSet:
        """All interior facets on the plane ``x_axis = coordinate``.

        ``bounds`` optionally restricts the transversal cell-center
        coordinates to axis-aligned intervals (one ``(lo, hi)`` pair per
        remaining axis, in axis order).
        """
        h = self.cell_size
        k = (coordinate - self.outer[axis][0]) / h
        if abs(k - round(k)) > _ALIGN_RTOL * max(1.0, abs(k)):
            raise FieldSpecError(
                [f"plane x_{axis} = {coordinate} is not on a grid line"]
            )
        k = int(round(k))
        if not 1 <= k <= self.shape[axis] - 1:
            raise FieldSpecError(
                [f"plane x_{axis} = {coordinate} carries no interior facets"]
            )
        other_axes = [ax for ax in range(self.dim) if ax != axis]
        ranges = []
        for j, ax in enumerate(other_axes):
            lo, hi = self.outer[ax]
            if bounds is not None:
                blo, bhi = bounds[j]
                lo, hi = max(lo, blo), min(hi, bhi)
            centers = self.outer[ax][0] + h * (np.arange(self.shape[ax]) + 0.5)
            ranges.append([int(i) for i in np.nonzero((centers > lo) & (centers < hi))[0]])
        facets = []
        for combo in itertools.product(*ranges):
            idx = [0] * self.dim
            idx[axis] = k - 1
            for ax, i in zip(other_axes, combo):
                idx[ax] = i
            facets.append((axis,) + tuple(idx))
        return frozenset(facets)

    def inner_facets(self) -> FacetSet:
        """Facets whose both adjacent cells lie in the inner box."""
        inner = self._inner_mask.reshape(self.shape)
        masks = []
        for ax in range(self.dim):
            lo = tuple(slice(0, -1) if a == ax else slice(None) for a in range(self.dim))
            hi = tuple(slice(1, None) if a == ax else slice(None) for a in range(self.dim))
            masks.append(inner[lo] & inner[hi])
        return self.facets_from_masks(masks)


def surface_measure(facets: FacetSet, grid: Grid) -> float:
    """Total (d-1)-area of a facet set: ``count * h^(d-1)``."""
    return len(facets) * grid.cell_size ** (grid.dim - 1)


# ---------------------------------------------------------------------------
# jet fields
# ---------------------------------------------------------------------------


def _freeze(a: np.ndarray, shape: tuple) -> np.ndarray:
    a = np.array(a, dtype=float)
    if a.shape != shape:
        raise FieldSpecError([f"array has shape {a.shape}, expected {shape}"])
    if not np.all(np.isfinite(a)):
        raise FieldSpecError(["field arrays must be finite"])
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class JetField:
    """Per-cell affine jets of a deformation with declared jump facets.

    Attributes
    ----------
    values : ndarray, shape (n_cells, d)
        Jet value at each cell center.
    grads : ndarray, shape (n_cells, d, d)
        Jet gradient on each cell.
    jump_values, jump_grads : frozenset
        Declared discontinuity facets of the deformation and of its gradient.
    """

    grid: Grid
    values: np.ndarray
    grads: np.ndarray
    jump_values: FacetSet = frozenset()
    jump_grads: FacetSet = frozenset()

    def __post_init__(self):
        n, d = self.grid.n_cells, self.grid.dim
        object.__setattr__(self, "values", _freeze(self.values, (n, d)))
        object.__setattr__(self, "grads", _freeze(self.grads, (n, d, d)))
        object.__setattr__(self, "jump_values", frozenset(self.jump_values))
        object.__setattr__(self, "jump_grads", frozenset(self.jump_grads))
        self.grid.check_facets(self.jump_values)
        self.grid.check_facets(self.jump_grads)


@dataclass(frozen=True)
class DisplacementJet:
    """Per-cell affine jets of a displacement with a single crack set.

    ``jumps`` collects every facet where the displacement (or its gradient)
    is discontinuous.  ``blowup_mask`` optionally marks cells on which a
    rescaled family diverges; it must stay inside the inner box.
    """

    grid: Grid
    values: np.ndarray
    grads: np.ndarray
    jumps: FacetSet = frozenset()
    blowup_mask: np.ndarray | None = None

    def __post_init__(self):
        n, d = self.grid.n_cells, self.grid.dim
        object.__setattr__(self, "values", _freeze(self.values, (n, d)))
        object.__setattr__(self, "grads", _freeze(self.grads, (n, d, d)))
        object.__setattr__(self, "jumps", frozenset(self.jumps))
        self.grid.check_facets(self.jumps)
        mask = self.blowup_mask
        if mask is None:
            mask = np.zeros(n, dtype=bool)
        mask = np.array(mask, dtype=bool)
        if mask.shape != (n,):
            raise FieldSpecError([f"blowup_mask has shape {mask.shape}, expected ({n},)"])
        if np.any(mask & ~self.grid.inner_mask()):
            raise FieldSpecError(["blowup_mask marks cells outside the inner box"])
        mask.setflags(write=False)
        object.__setattr__(self, "blowup_mask", mask)

    def strains(self) -> np.ndarray:
        """Per-cell symmetrised gradients, shape ``(n_cells, d, d)``."""
        return 0.5 * (self.grads + np.swapaxes(self.grads, -1, -2))


@dataclass(frozen=True)
class BoundaryDatum:
    """Smooth boundary displacement imposed on the frame ``outer \\ inner``.

    ``value`` and ``grad`` are batched callables over points ``(n, d)``;
    ``hess_bound`` is a sup-norm bound on second derivatives (used for
    compatibility tolerances and recovery budgets).
    """

    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    hess_bound: float = 0.0
    name: str = "custom"


def zero_boundary() -> BoundaryDatum:
    """The trivial boundary displacement ``h == 0``."""
    return BoundaryDatum(
        value=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        grad=lambda x: np.zeros(np.asarray(x).shape + (np.asarray(x).shape[-1],)),
        hess_bound=0.0,
        name="zero",
    )


def rotate_field(y: JetField, R: np.ndarray) -> JetField:
    """Compose a jet field with a constant rotation: jets ``(R a, R F)``."""
    R = np.asarray(R, dtype=float)
    return JetField(
        grid=y.grid,
        values=y.values @ R.T,
        grads=np.einsum("ij,njk->nik", R, y.grads),
        jump_values=y.jump_values,
        jump_grads=y.jump_grads,
    )


# ---------------------------------------------------------------------------
# sampling piecewise-smooth closed forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SmoothPiece:
    """One smooth branch of a piecewise map and the box of cells it governs.

    ``value`` and ``grad`` are batched callables mapping points of shape
    ``(n, d)`` to values ``(n, d)`` and gradients ``(n, d, d)``.  The region
    is an axis-aligned box whose finite edges must lie on grid lines;
    infinite bounds are allowed.
    """

    region: tuple
    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PiecewiseSpec:
    """A finite collection of smooth pieces tiling the outer box.

    ``hess_bound`` is an optional sup-norm bound on second derivatives of
    the pieces, used to pick curvature-aware compatibility tolerances.
    """

    pieces: tuple
    name: str = ""
    hess_bound: float = 0.0

    def tolerance(self, grid: Grid) -> ToleranceConfig:
        return curvature_tolerance(grid, self.hess_bound)


def _piece_assignment(grid: Grid, spec: PiecewiseSpec) -> np.ndarray:
    problems = []
    h = grid.cell_size
    for p_idx, piece in enumerate(spec.pieces):
        if len(piece.region) != grid.dim:
            problems.append(f"piece {p_idx}: region dimension mismatch")
            continue
        for ax, (lo, hi) in enumerate(piece.region):
            for val in (lo, hi):
                if not np.isfinite(val):
                    continue
                k = (val - grid.outer[ax][0]) / h
                if abs(k - round(k)) > _ALIGN_RTOL * max(1.0, abs(k)):
                    problems.append(
                        f"piece {p_idx}: interface x_{ax} = {val} is not "
                        "facet-aligned"
                    )
    if problems:
        raise FieldSpecError(problems)
    centers = grid.cell_centers()
    owner = np.full(grid.n_cells, -1, dtype=int)
    for p_idx, piece in enumerate(spec.pieces):
        inside = np.ones(grid.n_cells, dtype=bool)
        for ax, (lo, hi) in enumerate(piece.region):
            inside &= (centers[:, ax] > lo) & (centers[:, ax] < hi)
        clash = inside & (owner >= 0)
        if np.any(clash):
            c = int(np.nonzero(clash)[0][0])
            problems.append(
                f"cell at {tuple(centers[c])} is governed by pieces "
                f"{owner[c]} and {p_idx}"
            )
        owner[inside] = p_idx
    if np.any(owner < 0):
        c = int(np.nonzero(owner < 0)[0][0])
        problems.append(f"cell at {tuple(centers[c])} is covered by no piece")
    if problems:
        raise FieldSpecError(problems)
    return owner


def _interface_jumps(
    grid: Grid,
    owner: np.ndarray,
    values: np.ndarray,
    grads: np.ndarray,
    tol: ToleranceConfig,
) -> tuple[FacetSet, FacetSet]:
    """Classify inter-piece facets into value jumps and gradient jumps."""
    centers = grid.cell_centers()
    h = grid.cell_size
    owner_nd = owner.reshape(grid.shape)
    jump_vals, jump_grads = [], []
    for axis in range(grid.dim):
        lo_sl = tuple(slice(0, -1) if a == axis else slice(None) for a in range(grid.dim))
        hi_sl = tuple(slice(1, None) if a == axis else slice(None) for a in range(grid.dim))
        differs = owner_nd[lo_sl] != owner_nd[hi_sl]
        for idx in zip(*np.nonzero(differs)):
            f = (axis,) + tuple(int(i) for i in idx)
            c_lo, c_hi = grid.facet_cells(f)
            mid = centers[c_lo].copy()
            mid[axis] += 0.5 * h
            trace_lo = values[c_lo] + grads[c_lo] @ (mid - centers[c_lo])
            trace_hi = values[c_hi] + grads[c_hi] @ (mid - centers[c_hi])
            if np.linalg.norm(trace_lo - trace_hi) > tol.trace * h:
                jump_vals.append(f)
            if np.linalg.norm(grads[c_lo] - grads[c_hi]) > tol.gradient:
                jump_grads.append(f)
    return frozenset(jump_vals), frozenset(jump_grads)


def _sample_jets(grid: Grid, spec: PiecewiseSpec):
    owner = _piece_assignment(grid, spec)
    centers = grid.cell_centers()
    values = np.empty((grid.n_cells, grid.dim))
    grads = np.empty((grid.n_cells, grid.dim, grid.dim))
    for p_idx, piece in enumerate(spec.pieces):
        cells = owner == p_idx
        if not np.any(cells):
            continue
        pts = centers[cells]
        values[cells] = np.asarray(piece.value(pts), dtype=float)
        grads[cells] = np.asarray(piece.grad(pts), dtype=float)
    return owner, values, grads


def sample_field(grid: Grid, spec: PiecewiseSpec, tol: ToleranceConfig | None = None) -> JetField:
    """Sample a piecewise-smooth deformation into a jet field.

    Each cell receives the exact value and gradient of its governing piece at
    the cell center.  Facets between cells of different pieces are classified
    by comparing the two jets: a midpoint trace mismatch above
    ``tol.trace * h`` declares a value jump, a gradient mismatch above
    ``tol.gradient`` declares a gradient jump.

    Raises
    ------
    FieldSpecError
        If a region edge is off the grid lines (the offending interface is
        named), or the pieces overlap / leave cells uncovered.
    """
    if tol is None:
        tol = spec.tolerance(grid)
    owner, values, grads = _sample_jets(grid, spec)
    jv, jg = _interface_jumps(grid, owner, values, grads, tol)
    return JetField(grid=grid, values=values, grads=grads, jump_values=jv, jump_grads=jg)


def sample_displacement(
    grid: Grid,
    spec: PiecewiseSpec,
    tol: ToleranceConfig | None = None,
    blowup_mask: np.ndarray | None = None,
) -> DisplacementJet:
    """Sample a piecewise-smooth displacement; jump facets of value or
    gradient are merged into the single crack set."""
    if tol is None:
        tol = spec.tolerance(grid)
    owner, values, grads = _sample_jets(grid, spec)
    jv, jg = _interface_jumps(grid, owner, values, grads, tol)
    return DisplacementJet(
        grid=grid, values=values, grads=grads, jumps=jv | jg, blowup_mask=blowup_mask
    )


# ---------------------------------------------------------------------------
# discrete operators
# ---------------------------------------------------------------------------


def _second_differences(grid: Grid, grads: np.ndarray, excluded: FacetSet) -> np.ndarray:
    """Finite differences of per-cell gradients, skipping excluded facets.

    Central where both neighbour facets are usable, one-sided where one is,
    zero where neither is.  Returns shape ``(n_cells, d, d, d)`` with the
    differentiation direction on the last axis.
    """
    d = grid.dim
    h = grid.cell_size
    G = grads.reshape(grid.shape + (d, d))
    masks = grid.facet_masks(excluded)
    out = np.zeros(grid.shape + (d, d, d))
    for axis in range(d):
        open_facet = ~masks[axis]  # facet usable for differencing
        # has_fwd[c] == facet between c and c+e_axis exists and is open
        has_fwd = np.zeros(grid.shape, dtype=bool)
        has_bwd = np.zeros(grid.shape, dtype=bool)
        sl_lo = tuple(slice(0, -1) if a == axis else slice(None) for a in range(d))
        sl_hi = tuple(slice(1, None) if a == axis else slice(None) for a in range(d))
        has_fwd[sl_lo] = open_facet
        has_bwd[sl_hi] = open_facet
        G_fwd = np.zeros_like(G)
        G_bwd = np.zeros_like(G)
        G_fwd[sl_lo] = G[sl_hi]
        G_bwd[sl_hi] = G[sl_lo]
        both = has_fwd & has_bwd
        fwd_only = has_fwd & ~has_bwd
        bwd_only = has_bwd & ~has_fwd
        diff = np.zeros_like(G)
        diff[both] = (G_fwd[both] - G_bwd[both]) / (2.0 * h)
        diff[fwd_only] = (G_fwd[fwd_only] - G[fwd_only]) / h
        diff[bwd_only] = (G[bwd_only] - G_bwd[bwd_only]) / h
        out[..., axis] = diff
    return out.reshape(grid.n_cells, d, d, d)


def second_gradient(fld: JetField | DisplacementJet) -> np.ndarray:
    """Discrete second gradient of a jet field.

    Differences of the per-cell gradient are taken only across facets not
    declared as jumps (of the value or of the gradient); a missing neighbour
    degrades the stencil to one-sided, two missing neighbours give zero.
    On piecewise-affine fields with declared interfaces the result vanishes
    identically.

    Returns
    -------
    ndarray, shape (n_cells, d, d, d)
        ``out[c, i, j, k]`` approximates the derivative of gradient entry
        ``(i, j)`` along direction ``k``.
    """
    if isinstance(fld, DisplacementJet):
        excluded = fld.jumps
    else:
        excluded = fld.jump_values | fld.jump_grads
    return _second_differences(fld.grid, fld.grads, excluded)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of jet compatibility checks.

    ``trace_violations`` and ``grad_violations`` list ``(facet, mismatch)``
    pairs for every undeclared discontinuity found.
    """

    ok: bool
    trace_violations: tuple
    grad_violations: tuple

    def raise_if_failed(self):
        if not self.ok:
            msgs = [
                f"trace mismatch {m:.3e} at facet {f}" for f, m in self.trace_violations
            ] + [
                f"gradient mismatch {m:.3e} at facet {f}" for f, m in self.grad_violations
            ]
            raise FieldValidationError("; ".join(msgs))


def validate_field(
    fld: JetField | DisplacementJet, tol: ToleranceConfig | None = None
) -> ValidationReport:
    """Check declared-jump compatibility of a jet field.

    Across every facet not declared a value jump the two adjacent jets must
    agree at the facet midpoint to ``tol.trace * h``; across every facet not
    declared a gradient jump the gradients must agree to ``tol.gradient``
    (Frobenius).  Every violating facet is reported.
    """
    if tol is None:
        tol = ToleranceConfig()
    grid = fld.grid
    if isinstance(fld, DisplacementJet):
        jump_values = fld.jumps
        jump_grads = fld.jumps
    else:
        jump_values = fld.jump_values
        jump_grads = fld.jump_grads
    d, h = grid.dim, grid.cell_size
    values_nd = fld.values.reshape(grid.shape + (d,))
    grads_nd = fld.grads.reshape(grid.shape + (d, d))
    val_masks = grid.facet_masks(jump_values)
    grad_masks = grid.facet_masks(jump_grads)
    trace_bad, grad_bad = [], []
    for axis in range(d):
        sl_lo = tuple(slice(0, -1) if a == axis else slice(None) for a in range(d))
        sl_hi = tuple(slice(1, None) if a == axis else slice(None) for a in range(d))
        v_lo, v_hi = values_nd[sl_lo], values_nd[sl_hi]
        g_lo, g_hi = grads_nd[sl_lo], grads_nd[sl_hi]
        # jets evaluated at the shared facet midpoint, +-h/2 along `axis`
        trace_lo = v_lo + 0.5 * h * g_lo[..., :, axis]
        trace_hi = v_hi - 0.5 * h * g_hi[..., :, axis]
        trace_mismatch = np.linalg.norm(trace_lo - trace_hi, axis=-1)
        grad_mismatch = np.sqrt(np.sum((g_lo - g_hi) ** 2, axis=(-1, -2)))
        t_bad = (trace_mismatch > tol.trace * h) & ~val_masks[axis]
        g_bad = (grad_mismatch > tol.gradient) & ~grad_masks[axis]
        for idx in zip(*np.nonzero(t_bad)):
            f = (axis,) + tuple(int(i) for i in idx)
            trace_bad.append((f, float(trace_mismatch[idx])))
        for idx in zip(*np.nonzero(g_bad)):
            f = (axis,) + tuple(int(i) for i in idx)
            grad_bad.append((f, float(grad_mismatch[idx])))
    return ValidationReport(
        ok=not trace_bad and not grad_bad,
        trace_violations=tuple(sorted(trace_bad)),
        grad_violations=tuple(sorted(grad_bad)),
    )
