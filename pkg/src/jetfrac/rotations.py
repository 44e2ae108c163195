"""Batched helpers on the rotation group SO(d): projections, distances, sampling.

All routines accept arrays of shape ``(..., d, d)`` and operate on the last two
axes, so a field of per-cell gradients can be processed in one call.
"""

from __future__ import annotations

import warnings

import numpy as np

# Smallest singular value below which the nearest-rotation projection is
# treated as degenerate and replaced by the identity.
DEGENERATE_TOL = 1.0e-12


def sym(F: np.ndarray) -> np.ndarray:
    """Symmetric part ``(F + F^T) / 2`` over the last two axes."""
    return 0.5 * (F + np.swapaxes(F, -1, -2))


def skew(F: np.ndarray) -> np.ndarray:
    """Skew part ``(F - F^T) / 2`` over the last two axes."""
    return 0.5 * (F - np.swapaxes(F, -1, -2))


def frobenius(F: np.ndarray) -> np.ndarray:
    """Frobenius norm over the last two axes."""
    return np.sqrt(np.sum(F * F, axis=(-1, -2)))


def rotation_2d(angle: float) -> np.ndarray:
    """Counter-clockwise plane rotation by ``angle`` (radians)."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def _nearest_rotation_2d(F: np.ndarray) -> np.ndarray:
    # Closed form for 2x2 blocks: the maximiser of tr(R^T F) over SO(2) points
    # along (F00 + F11, F10 - F01), independent of the sign of det F.
    p = F[..., 0, 0] + F[..., 1, 1]
    q = F[..., 1, 0] - F[..., 0, 1]
    norm = np.hypot(p, q)
    degenerate = norm < DEGENERATE_TOL
    if np.any(degenerate):
        warnings.warn(
            "nearest_rotation: degenerate input (conformal part ~ 0); "
            "falling back to the identity",
            RuntimeWarning,
            stacklevel=3,
        )
    safe = np.where(degenerate, 1.0, norm)
    c = np.where(degenerate, 1.0, p / safe)
    s = np.where(degenerate, 0.0, q / safe)
    R = np.empty(F.shape, dtype=float)
    R[..., 0, 0] = c
    R[..., 0, 1] = -s
    R[..., 1, 0] = s
    R[..., 1, 1] = c
    return R


def nearest_rotation(F: np.ndarray) -> np.ndarray:
    """Nearest matrix in SO(d) in the Frobenius distance, batched.

    Computed from the singular value decomposition ``F = U diag(s) V^T`` as
    ``U V^T``, with the last column of ``U`` flipped whenever that product has
    negative determinant.  Inputs whose smallest singular value falls below
    ``DEGENERATE_TOL`` have no well-defined projection; those entries return
    the identity and a ``RuntimeWarning`` is issued.

    Parameters
    ----------
    F : ndarray, shape (..., d, d)

    Returns
    -------
    ndarray, shape (..., d, d)
        Proper rotations (determinant +1).
    """
    F = np.asarray(F, dtype=float)
    d = F.shape[-1]
    if F.shape[-2] != d:
        raise ValueError(f"expected square matrices, got shape {F.shape}")
    if d == 2:
        return _nearest_rotation_2d(F)
    U, S, Vt = np.linalg.svd(F)
    degenerate = S[..., -1] < DEGENERATE_TOL
    if np.any(degenerate):
        warnings.warn(
            "nearest_rotation: nearly rank-deficient input; "
            "falling back to the identity",
            RuntimeWarning,
            stacklevel=2,
        )
    R = U @ Vt
    flip = np.linalg.det(R) < 0.0
    if np.any(flip):
        U = U.copy()
        U[..., :, -1] = np.where(flip[..., None], -U[..., :, -1], U[..., :, -1])
        R = U @ Vt
    if np.any(degenerate):
        R = np.where(degenerate[..., None, None], np.eye(d), R)
    return R


def so_distance2(F: np.ndarray) -> np.ndarray:
    """Squared Frobenius distance to SO(d), batched over leading axes.

    Evaluated through singular values: with ``s_1 >= ... >= s_d``,

    * ``det F >= 0``:  ``sum (s_i - 1)^2``
    * ``det F <  0``:  ``sum_{i<d} (s_i - 1)^2 + (s_d + 1)^2``

    so the reflected branch penalises the smallest singular value as
    ``(s_d + 1)^2``.  For d = 2 an equivalent closed form is used.
    """
    F = np.asarray(F, dtype=float)
    d = F.shape[-1]
    if d == 2:
        # |F|^2 - 2*hypot(F00+F11, F10-F01) + 2 covers both determinant signs.
        p = F[..., 0, 0] + F[..., 1, 1]
        q = F[..., 1, 0] - F[..., 0, 1]
        val = np.sum(F * F, axis=(-1, -2)) - 2.0 * np.hypot(p, q) + 2.0
        return np.maximum(val, 0.0)
    S = np.linalg.svd(F, compute_uv=False)
    neg = np.linalg.det(F) < 0.0
    last = np.where(neg, (S[..., -1] + 1.0) ** 2, (S[..., -1] - 1.0) ** 2)
    rest = np.sum((S[..., :-1] - 1.0) ** 2, axis=-1)
    return rest + last


def so_distance2_grad(F: np.ndarray) -> np.ndarray:
    """Gradient of ``so_distance2`` with respect to ``F``: ``2 (F - proj(F))``."""
    F = np.asarray(F, dtype=float)
    return 2.0 * (F - nearest_rotation(F))


def random_rotation(rng: np.random.Generator, d: int) -> np.ndarray:
    """Draw a random proper rotation via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0.0:
        q[:, -1] = -q[:, -1]
    return q
