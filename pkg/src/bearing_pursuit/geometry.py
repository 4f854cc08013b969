"""Small fixed-size numeric primitives shared by the filter and the world.

Bearing vectors, orthogonal projectors, planar rotations and the positive
semidefinite pseudo-inverse the measurement update needs.  Everything works
on plain float64 numpy arrays (sizes are at most 6x6, so no sparse or
structured machinery).  All functions are pure and safe to call from any
thread.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateVector, NotSymmetric

# Below this norm a direction is meaningless; callers must handle the error.
EPS_NORM = 1e-9
# Relative eigenvalue cutoff for pseudo-inverse rank truncation.  The
# bearing-noise matrix has exact rank 2; a relative cutoff keeps the
# truncation robust under floating point.
EPS_PINV = 1e-9


def project(g: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto the plane perpendicular to ``g``.

    Returns ``P = I - (g/|g|)(g/|g|)^T``: symmetric, idempotent, and
    ``P @ g == 0``.  Raises :class:`DegenerateVector` if ``|g| <= EPS_NORM``.
    """
    g = np.asarray(g, dtype=float)
    n = float(np.linalg.norm(g))
    if not np.isfinite(n) or n <= EPS_NORM:
        raise DegenerateVector(f"cannot build a projector from |g|={n:.3e}")
    u = g / n
    return np.eye(g.shape[0]) - np.outer(u, u)


def bearing(p_from: np.ndarray, p_to: np.ndarray) -> np.ndarray:
    """Unit vector pointing from ``p_from`` to ``p_to``.

    Raises :class:`DegenerateVector` on (near-)coincident points.
    """
    d = np.asarray(p_to, dtype=float) - np.asarray(p_from, dtype=float)
    n = float(np.linalg.norm(d))
    if not np.isfinite(n) or n <= EPS_NORM:
        raise DegenerateVector(f"bearing undefined for separation {n:.3e} m")
    return d / n


def rotation2d(theta: float) -> np.ndarray:
    """Proper planar rotation [[cos, -sin], [sin, cos]]."""
    c = np.cos(theta)
    s = np.sin(theta)
    return np.array([[c, -s], [s, c]])


def pinv_psd(m: np.ndarray, rel_cutoff: float = EPS_PINV) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of a symmetric PSD matrix.

    Eigendecomposition with a cutoff of ``rel_cutoff`` relative to the
    largest eigenvalue; eigenvalues at or below the cutoff are treated as
    exact zeros.  Raises :class:`NotSymmetric` if the input is asymmetric
    beyond tolerance.
    """
    m = np.asarray(m, dtype=float)
    scale = float(np.abs(m).max()) if m.size else 0.0
    if float(np.abs(m - m.T).max()) > 1e-8 * max(1.0, scale):
        raise NotSymmetric("pinv_psd requires a symmetric matrix")
    if scale == 0.0:
        return np.zeros_like(m)
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    cutoff = rel_cutoff * float(w.max())
    inv_w = np.where(w > cutoff, 1.0 / np.where(w > cutoff, w, 1.0), 0.0)
    return (v * inv_w) @ v.T


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    t = np.fmod(theta + np.pi, 2.0 * np.pi)
    if t <= 0.0:
        t += 2.0 * np.pi
    return float(t - np.pi)


def require_finite(arr: np.ndarray, what: str) -> np.ndarray:
    """Raise ``ValueError`` if ``arr`` contains NaN or Inf."""
    arr = np.asarray(arr, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite entries")
    return arr
