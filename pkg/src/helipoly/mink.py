"""Linear algebra in Minkowski 3-space R^{1,2}.

Vectors are plain float arrays whose last axis has length 3, so every
function here broadcasts over leading axes. The metric is
``diag(-1, 1, 1)``; the hyperbolic plane H^2 is the sheet
``a o a = -1, a[0] > 0``.
"""

from enum import Enum

import numpy as np

from .errors import DegenerateAxis, LightLikeAxis, NotTimeLike

METRIC = np.diag([-1.0, 1.0, 1.0])


class CausalClass(Enum):
    TIME_LIKE = "time-like"
    SPACE_LIKE = "space-like"
    LIGHT_LIKE = "light-like"


def mink_dot(a, b):
    """Pseudo-scalar product ``-a1 b1 + a2 b2 + a3 b3``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return -a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def mink_cross(a, b):
    """Minkowski cross product ``a ^_- b``.

    The result is ``o``-orthogonal to both arguments.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    out[..., 0] = -(a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1])
    out[..., 1] = a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2]
    out[..., 2] = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    return out


def mink_norm(a):
    """``sqrt(|a o a|)``, the Minkowski length regardless of causal class."""
    return np.sqrt(np.abs(mink_dot(a, a)))


def default_tolerance(a):
    a = np.asarray(a, dtype=float)
    return 1e-10 * (1.0 + np.sum(a * a, axis=-1))


def causal_class(a, tol=None):
    """Classify a single vector as time-, space- or light-like.

    ``tol`` defaults to ``1e-10 * (1 + |a|^2)`` (Euclidean norm), so that
    large boosted vectors are not misread as light-like.
    """
    a = np.asarray(a, dtype=float)
    if tol is None:
        tol = default_tolerance(a)
    if tol < 0:
        raise ValueError("tolerance must be non-negative")
    q = float(mink_dot(a, a))
    if abs(q) <= tol:
        return CausalClass.LIGHT_LIKE
    return CausalClass.SPACE_LIKE if q > 0 else CausalClass.TIME_LIKE


def renormalize_h2(a):
    """Project future time-like vectors radially onto H^2.

    Raises
    ------
    NotTimeLike
        If any vector is not future time-like (or not finite). The solvers
        read this as a blow-up of the integration.
    """
    a = np.asarray(a, dtype=float)
    q = mink_dot(a, a)
    bad = ~(np.isfinite(q) & (q < 0) & (a[..., 0] > 0))
    if np.any(bad):
        raise NotTimeLike(f"{int(np.count_nonzero(bad))} vector(s) are not future time-like")
    return a / np.sqrt(-q)[..., None]


def generator(axis):
    """Matrix of ``v -> axis ^_- v``, an element of so(2,1)."""
    a1, a2, a3 = np.asarray(axis, dtype=float)
    return np.array([[0.0, a3, -a2],
                     [a3, 0.0, -a1],
                     [-a2, a1, 0.0]])


def generator_vector(K):
    """Inverse of :func:`generator`."""
    return np.array([K[2, 1], -K[0, 2], K[0, 1]])


def so21_exp(axis):
    """``exp(generator(axis))`` in closed form.

    Uses ``K^3 = (axis o axis) K``, so the exponential is
    ``I + f1 K + f2 K^2`` with hyperbolic or circular coefficients
    depending on the sign of ``axis o axis``.
    """
    K = generator(axis)
    lam2 = float(mink_dot(axis, axis))
    if abs(lam2) < 1e-8:
        # Taylor series; truncation error below 1e-30 in this band
        f1 = 1.0 + lam2 / 6.0 + lam2 * lam2 / 120.0
        f2 = 0.5 + lam2 / 24.0 + lam2 * lam2 / 720.0
    elif lam2 > 0:
        lam = np.sqrt(lam2)
        f1 = np.sinh(lam) / lam
        f2 = 2.0 * np.sinh(lam / 2.0) ** 2 / lam2
    else:
        mu = np.sqrt(-lam2)
        f1 = np.sin(mu) / mu
        f2 = 2.0 * np.sin(mu / 2.0) ** 2 / (-lam2)
    return np.eye(3) + f1 * K + f2 * (K @ K)


def lorentz_rotation(axis, angle):
    """One-parameter rotation ``exp(angle * K)`` about a unit axis.

    For a time-like axis this is a circular rotation by ``angle``; for a
    space-like axis a hyperbolic rotation (boost) of rapidity ``angle``.

    Raises
    ------
    LightLikeAxis
        If the axis is light-like.
    """
    axis = np.asarray(axis, dtype=float)
    if causal_class(axis) is CausalClass.LIGHT_LIKE:
        raise LightLikeAxis(f"axis {axis} is light-like")
    if abs(abs(float(mink_dot(axis, axis))) - 1.0) > 1e-8:
        raise ValueError("rotation axis must have unit Minkowski length")
    return so21_exp(angle * axis)


def preserves_metric(L, tol=1e-10):
    return np.allclose(L.T @ METRIC @ L, METRIC, atol=tol)


def boost_to_time_axis(v):
    """Proper Lorentz boost mapping the direction of time-like ``v`` to ``(1,0,0)``."""
    v = np.asarray(v, dtype=float)
    q = float(mink_dot(v, v))
    if q >= -default_tolerance(v):
        raise DegenerateAxis(f"vector {v} is not time-like")
    u = v / np.sqrt(-q)
    if u[0] < 0:
        u = -u
    g = u[0]
    w = u[1:]
    L = np.eye(3)
    L[0, 0] = g
    L[0, 1:] = -w
    L[1:, 0] = -w
    L[1:, 1:] += np.outer(w, w) / (1.0 + g)
    return L


def orthonormal_frame_map(t, x, z):
    """Lorentz map sending an orthonormal frame ``(t, x, z)`` to the standard basis.

    ``t`` must be unit future time-like and ``x``, ``z`` unit space-like,
    all mutually ``o``-orthogonal.
    """
    return np.vstack([-np.asarray(t, float) * np.array([-1.0, 1.0, 1.0]),
                      np.asarray(x, float) * np.array([-1.0, 1.0, 1.0]),
                      np.asarray(z, float) * np.array([-1.0, 1.0, 1.0])])


def map_pair(a_minus, a_plus, b_minus, b_plus):
    """Proper Lorentz transform with ``M a_- = b_-`` and ``M a_+ = b_+``.

    Both pairs must be unit time-like with the same product; the third
    basis vector is fixed by the cross product, which is covariant under
    proper transforms.
    """
    A = np.column_stack([a_minus, a_plus, mink_cross(a_minus, a_plus)])
    B = np.column_stack([b_minus, b_plus, mink_cross(b_minus, b_plus)])
    return B @ np.linalg.inv(A)
