"""Named analytic boundary data, deformation fields, and displacement jets.

Scenario files refer to fields by name; tests reuse the same constructions.
Everything here is exact: jets are sampled from closed-form values and
gradients, and jump sets are declared from the known discontinuity planes.
"""

from __future__ import annotations

import numpy as np

from .fields import (
    BoundaryDatum,
    DisplacementJet,
    FieldSpecError,
    Grid,
    JetField,
    zero_boundary,
)
from .rotations import rotation_2d

# ---------------------------------------------------------------------------
# boundary displacements
# ---------------------------------------------------------------------------


def affine_boundary(matrix, offset=None, name: str = "affine") -> BoundaryDatum:
    """Affine displacement ``h(x) = B x + b`` (zero Hessian)."""
    B = np.asarray(matrix, dtype=float)
    d = B.shape[0]
    if B.shape != (d, d):
        raise FieldSpecError([f"affine boundary matrix must be square, got {B.shape}"])
    b = np.zeros(d) if offset is None else np.asarray(offset, dtype=float)

    def value(x):
        return x @ B.T + b

    def grad(x):
        return np.broadcast_to(B, (np.asarray(x).shape[0], d, d)).copy()

    return BoundaryDatum(value=value, grad=grad, hess_bound=0.0, name=name)


def stretch_boundary(t: float) -> BoundaryDatum:
    """Uniaxial stretch ``h(x) = t x_1 e_1``."""
    B = np.zeros((2, 2))
    B[0, 0] = float(t)
    return affine_boundary(B, name="stretch")


def stretch_skew_boundary(stretch: float, skew: float) -> BoundaryDatum:
    """Stretch plus infinitesimal rotation: ``h(x) = t x_1 e_1 + a (-x_2, x_1)``."""
    B = np.array([[float(stretch), -float(skew)], [float(skew), 0.0]])
    return affine_boundary(B, name="stretch_skew")


def sine_boundary(amplitude: float) -> BoundaryDatum:
    """Single-component sinusoidal shear ``h(x) = (A sin(2 pi x_1) / (2 pi), 0)``."""
    A = float(amplitude)
    two_pi = 2.0 * np.pi

    def value(x):
        out = np.zeros_like(np.asarray(x, dtype=float))
        out[:, 0] = A * np.sin(two_pi * x[:, 0]) / two_pi
        return out

    def grad(x):
        n, d = np.asarray(x).shape
        out = np.zeros((n, d, d))
        out[:, 0, 0] = A * np.cos(two_pi * x[:, 0])
        return out

    return BoundaryDatum(value=value, grad=grad, hess_bound=two_pi * abs(A), name="sine")


def quadratic_boundary(coefficient: float) -> BoundaryDatum:
    """Component-wise parabola ``h(x) = c (x_1^2, x_2^2)``."""
    c = float(coefficient)

    def value(x):
        return c * np.asarray(x, dtype=float) ** 2

    def grad(x):
        x = np.asarray(x, dtype=float)
        n, d = x.shape
        out = np.zeros((n, d, d))
        for i in range(d):
            out[:, i, i] = 2.0 * c * x[:, i]
        return out

    return BoundaryDatum(value=value, grad=grad, hess_bound=2.0 * abs(c), name="quadratic")


BOUNDARY_FORMS = {
    "zero": lambda: zero_boundary(),
    "affine": affine_boundary,
    "stretch": stretch_boundary,
    "stretch_skew": stretch_skew_boundary,
    "sine": sine_boundary,
    "quadratic": quadratic_boundary,
}


def build_boundary(name: str, **params) -> BoundaryDatum:
    if name not in BOUNDARY_FORMS:
        known = ", ".join(sorted(BOUNDARY_FORMS))
        raise FieldSpecError([f"unknown boundary form {name!r}; known: {known}"])
    return BOUNDARY_FORMS[name](**params)


# ---------------------------------------------------------------------------
# deformation fields
# ---------------------------------------------------------------------------


def identity_field(grid: Grid) -> JetField:
    """The identity deformation ``y = x``."""
    x = grid.cell_centers()
    grads = np.broadcast_to(np.eye(grid.dim), (grid.n_cells, grid.dim, grid.dim))
    return JetField(grid, x.copy(), grads.copy())


def rigid_field(grid: Grid, angle: float = 0.0, offset=None) -> JetField:
    """Rigid motion ``y = R x + b`` with ``R`` the rotation by ``angle``."""
    if grid.dim != 2:
        raise FieldSpecError(["rigid_field is two-dimensional"])
    R = rotation_2d(float(angle))
    b = np.zeros(2) if offset is None else np.asarray(offset, dtype=float)
    x = grid.cell_centers()
    grads = np.broadcast_to(R, (grid.n_cells, 2, 2))
    return JetField(grid, x @ R.T + b, grads.copy())


def two_piece_stretch(grid: Grid, delta: float, cut: float = 0.0) -> JetField:
    """Identity left of the cut, ``(2 x_1 + delta, x_2)`` right of it.

    For ``delta > 0`` both the value and the gradient jump across the cut;
    for ``delta == 0`` the trace is continuous and only the gradient jumps,
    so the unrelaxed energy of this field is infinite.
    """
    if grid.dim != 2:
        raise FieldSpecError(["two_piece_stretch is two-dimensional"])
    delta = float(delta)
    x = grid.cell_centers()
    right = x[:, 0] > cut
    values = x.copy()
    values[right, 0] = 2.0 * x[right, 0] + delta
    grads = np.broadcast_to(np.eye(2), (grid.n_cells, 2, 2)).copy()
    grads[right, 0, 0] = 2.0
    cut_facets = grid.facet_plane(0, cut)
    jump_values = cut_facets if delta > 0.0 else frozenset()
    return JetField(
        grid, values, grads, jump_values=jump_values, jump_grads=cut_facets
    )


def rotation_pair(
    grid: Grid, eps: float, angle_rate: float = 1.0, cut: float = 2.0
) -> JetField:
    """Identity left of the cut, the rotation by ``eps * angle_rate`` right of it.

    The rotation is ``Id + eps*A + O(eps^2)`` with ``A`` the skew generator
    scaled by ``angle_rate``, so the family has bounded energy (surface only)
    and admits two natural piecewise-rigid descriptions: one grain per piece,
    or a single grain covering everything.
    """
    if grid.dim != 2:
        raise FieldSpecError(["rotation_pair is two-dimensional"])
    R = rotation_2d(float(eps) * float(angle_rate))
    x = grid.cell_centers()
    right = x[:, 0] > cut
    values = x.copy()
    values[right] = x[right] @ R.T
    grads = np.broadcast_to(np.eye(2), (grid.n_cells, 2, 2)).copy()
    grads[right] = R
    cut_facets = grid.facet_plane(0, cut)
    return JetField(
        grid, values, grads, jump_values=cut_facets, jump_grads=cut_facets
    )


def small_displacement_field(grid: Grid, eps: float, h_bc: BoundaryDatum) -> JetField:
    """Deformation ``y = id + eps * h`` for a smooth displacement ``h``."""
    x = grid.cell_centers()
    d = grid.dim
    values = x + float(eps) * np.asarray(h_bc.value(x), dtype=float)
    grads = np.broadcast_to(np.eye(d), (grid.n_cells, d, d)).copy()
    grads += float(eps) * np.asarray(h_bc.grad(x), dtype=float)
    return JetField(grid, values, grads)


def build_field(name: str, grid: Grid, eps: float | None = None, **params) -> JetField:
    """Instantiate a named deformation field on a grid.

    ``eps`` is required by the eps-dependent families (``rotation_pair``,
    ``small_displacement``) and ignored by the rest.  Fields taking a
    boundary form accept it as ``boundary={"name": ..., <params>}``.
    """
    if name == "identity":
        return identity_field(grid, **params)
    if name == "rigid":
        return rigid_field(grid, **params)
    if name == "two_piece_stretch":
        return two_piece_stretch(grid, **params)
    if name == "rotation_pair":
        if eps is None:
            raise FieldSpecError(["rotation_pair requires eps"])
        return rotation_pair(grid, eps, **params)
    if name == "small_displacement":
        if eps is None:
            raise FieldSpecError(["small_displacement requires eps"])
        bspec = dict(params.pop("boundary", {"name": "zero"}))
        h_bc = build_boundary(bspec.pop("name"), **bspec)
        return small_displacement_field(grid, eps, h_bc, **params)
    known = "identity, rigid, two_piece_stretch, rotation_pair, small_displacement"
    raise FieldSpecError([f"unknown field form {name!r}; known: {known}"])


# ---------------------------------------------------------------------------
# displacement jets
# ---------------------------------------------------------------------------


def displacement_from_boundary(grid: Grid, h_bc: BoundaryDatum) -> DisplacementJet:
    """The smooth displacement ``u = h`` sampled as a crack-free jet."""
    x = grid.cell_centers()
    return DisplacementJet(
        grid,
        np.asarray(h_bc.value(x), dtype=float),
        np.asarray(h_bc.grad(x), dtype=float),
    )


def affine_step_displacement(
    grid: Grid,
    cut: float,
    matrix=None,
    offset=None,
    blowup_inside: bool = False,
) -> DisplacementJet:
    """Displacement ``u = (B x + b) * [x_1 > cut]`` with the cut as its crack.

    ``blowup_inside`` marks the cells right of the cut as the divergence set
    of a rescaled family (they must lie in the inner box).
    """
    d = grid.dim
    B = np.zeros((d, d)) if matrix is None else np.asarray(matrix, dtype=float)
    b = np.zeros(d) if offset is None else np.asarray(offset, dtype=float)
    x = grid.cell_centers()
    right = x[:, 0] > cut
    values = np.zeros((grid.n_cells, d))
    values[right] = x[right] @ B.T + b
    grads = np.zeros((grid.n_cells, d, d))
    grads[right] = B
    mask = right if blowup_inside else None
    return DisplacementJet(
        grid, values, grads, jumps=grid.facet_plane(0, cut), blowup_mask=mask
    )


def step_displacement(
    grid: Grid, cut: float, offset, blowup_inside: bool = False
) -> DisplacementJet:
    """Piecewise-constant displacement jumping by ``offset`` across the cut."""
    return affine_step_displacement(
        grid, cut, matrix=None, offset=offset, blowup_inside=blowup_inside
    )


def boxed_step_displacement(grid: Grid, box, offset) -> DisplacementJet:
    """Translation by ``offset`` on an axis-aligned box, zero outside.

    The crack is the full box boundary, so the displacement vanishes on the
    frame and is admissible for recovery constructions even with a zero
    boundary datum.  Both gradients are zero, hence the jet is exactly
    piecewise rigid (in the small-strain sense) with a closed crack.
    """
    d = grid.dim
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    if len(box) != d:
        raise FieldSpecError("box must provide one interval per dimension")
    b = np.asarray(offset, dtype=float)
    x = grid.cell_centers()
    inside = np.ones(grid.n_cells, dtype=bool)
    for axis, (lo, hi) in enumerate(box):
        inside &= (x[:, axis] > lo) & (x[:, axis] < hi)
    if not inside.any():
        raise FieldSpecError("box contains no cell centers")
    values = np.zeros((grid.n_cells, d))
    values[inside] = b
    grads = np.zeros((grid.n_cells, d, d))
    walls: set = set()
    for axis, (lo, hi) in enumerate(box):
        rest = tuple(iv for a, iv in enumerate(box) if a != axis)
        walls |= grid.facet_plane(axis, lo, bounds=rest)
        walls |= grid.facet_plane(axis, hi, bounds=rest)
    return DisplacementJet(grid, values, grads, jumps=frozenset(walls))


def two_piece_labels(grid: Grid, cut: float) -> np.ndarray:
    """Cell labels 0/1 split at the plane ``x_1 = cut`` (for manual partitions)."""
    return (grid.cell_centers()[:, 0] > cut).astype(int)


def single_label(grid: Grid) -> np.ndarray:
    """The trivial all-zero labelling (one grain covering everything)."""
    return np.zeros(grid.n_cells, dtype=int)
