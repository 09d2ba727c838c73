"""Self-similar one-corner solution and its link to helical polygons.

The self-similar family ``X(s, t) = sqrt(t) G(s / sqrt(t))`` has curvature
``c0 / sqrt(t)`` and torsion ``s / (2 t)``. In the similarity variable
``u = s / sqrt(t)`` the Frenet frame obeys

    T' = c0 n,   n' = c0 T + (u/2) b,   b' = -(u/2) n,

and the profile satisfies ``G(u) = u T(u) + 2 c0 b(u)``. The tangent tends
to two asymptotes ``A-`` and ``A+`` whose hyperbolic angle ``rho`` obeys
``cosh(rho/2) = exp(pi c0^2 / 2)``.
"""

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .algebraic import estimate_difference_quotient
from .errors import AsymptoteMismatch, HelipolyError
from .mink import mink_cross, mink_dot, renormalize_h2
from .polygon import side_tangents, vertices


@dataclass
class SelfSimilarSolution:
    """Frame and curve of the one-corner problem at a fixed time.

    Attributes
    ----------
    c0, t : float
        Amplitude and time.
    s : ndarray, shape (n,)
        Arclength grid, symmetric about 0.
    T, n, b : ndarray, shape (n, 3)
        Tangent, normal and binormal.
    X : ndarray, shape (n, 3)
        Curve, with ``X(0) = 2 c0 sqrt(t) b(0)``.
    A_minus, A_plus : ndarray, shape (3,)
        Asymptotic tangents for ``s -> -inf`` and ``s -> +inf``.
    """

    c0: float
    t: float
    s: np.ndarray
    T: np.ndarray
    n: np.ndarray
    b: np.ndarray
    X: np.ndarray
    A_minus: np.ndarray
    A_plus: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def angle(self):
        """Hyperbolic angle between the asymptotes."""
        return math.acosh(max(1.0, -float(mink_dot(self.A_minus, self.A_plus))))

    @property
    def cosh_half_angle(self):
        return math.cosh(self.angle / 2)

    def profile(self):
        """``sqrt(t) (u T + 2 c0 b)``, the closed-form curve for comparison with ``X``."""
        u = self.s / math.sqrt(self.t)
        return math.sqrt(self.t) * (u[:, None] * self.T + 2 * self.c0 * self.b)


def predicted_cosh_half_angle(c0):
    """``exp(pi c0^2 / 2)``."""
    return math.exp(math.pi * c0 * c0 / 2)


def amplitude_for_angle(rho):
    """Inverse of :func:`predicted_cosh_half_angle` in terms of the angle ``rho``."""
    return math.sqrt(2 / math.pi * math.log(math.cosh(rho / 2)))


def _axes(u0, h, c0):
    """so(2,1) axis of the fourth-order Magnus step from ``u0`` to ``u0 + h``.

    The frame matrix (rows T, n, b) satisfies ``F' = K(a(u)) F`` with
    ``a(u) = (-u/2, 0, c0)``. Two-point Gauss quadrature plus the leading
    commutator gives ``Omega = h/2 (K1 + K2) + sqrt(3) h^2/12 [K2, K1]``.
    Only the first axis component depends on ``u``, so the commutator
    is ``(u2 - u1)/2 * c0`` along ``e2``.
    """
    r = math.sqrt(3) / 6
    u1 = u0 + (0.5 - r) * h
    u2 = u0 + (0.5 + r) * h
    ax = np.empty(u0.shape + (3,))
    ax[..., 0] = -h / 2 * (u1 + u2) / 2
    ax[..., 2] = h * c0
    # only a1 varies within the step, so [K2, K1] is a multiple of K(e2)
    ax[..., 1] = math.sqrt(3) * h * h / 12 * ((u2 - u1) / 2) * c0
    return ax


def _batch_exp(ax):
    """Vectorized closed-form exponential of so(2,1) generators."""
    a1, a2, a3 = ax[..., 0], ax[..., 1], ax[..., 2]
    K = np.zeros(ax.shape[:-1] + (3, 3))
    K[..., 0, 1] = a3
    K[..., 0, 2] = -a2
    K[..., 1, 0] = a3
    K[..., 1, 2] = -a1
    K[..., 2, 0] = -a2
    K[..., 2, 1] = a1
    lam2 = -a1 * a1 + a2 * a2 + a3 * a3
    f1 = np.empty_like(lam2)
    f2 = np.empty_like(lam2)
    small = np.abs(lam2) < 1e-8
    pos = (lam2 > 0) & ~small
    neg = (lam2 < 0) & ~small
    f1[small] = 1 + lam2[small] / 6 + lam2[small] ** 2 / 120
    f2[small] = 0.5 + lam2[small] / 24 + lam2[small] ** 2 / 720
    lam = np.sqrt(lam2[pos])
    f1[pos] = np.sinh(lam) / lam
    f2[pos] = 2 * np.sinh(lam / 2) ** 2 / lam2[pos]
    mu = np.sqrt(-lam2[neg])
    f1[neg] = np.sin(mu) / mu
    f2[neg] = 2 * np.sin(mu / 2) ** 2 / (-lam2[neg])
    return (np.eye(3) + f1[..., None, None] * K
            + f2[..., None, None] * np.einsum("...ij,...jk->...ik", K, K))


@numba.njit(cache=True)
def _chain(E, F0):
    out = np.empty((E.shape[0] + 1, 3, 3))
    out[0] = F0
    for k in range(E.shape[0]):
        out[k + 1] = E[k] @ out[k]
    return out


def _integrate(c0, h, steps):
    u = h * np.arange(steps, dtype=float)
    E = _batch_exp(_axes(u, h, c0))
    return _chain(E, np.eye(3))


def solve_one_corner(c0, t, ds=None, s_max=None, tail=0.1):
    """Integrate the self-similar frame outward from ``s = 0``.

    Parameters
    ----------
    c0 : float
        Amplitude, ``c0 > 0``.
    t : float
        Time, ``t > 0``.
    ds : float, optional
        Arclength step; defaults to ``sqrt(t) / 50``.
    s_max : float, optional
        Half-width of the grid; defaults to ``40 sqrt(t) max(1, 1/c0)``.
    tail : float
        Fraction of each half-grid averaged to estimate the asymptotes.

    Returns
    -------
    SelfSimilarSolution
    """
    if not (c0 > 0 and t > 0):
        raise HelipolyError(f"need c0 > 0 and t > 0, got c0={c0}, t={t}")
    rt = math.sqrt(t)
    if s_max is None:
        s_max = 40 * rt * max(1.0, 1.0 / c0)
    if ds is None:
        ds = rt / 50
    h = ds / rt
    steps = int(math.ceil(s_max / ds))
    F = _integrate(c0, h, steps)
    # even curvature and odd torsion: T(-u) is T(u) rotated by pi about e1,
    # while n(-u) and b(-u) are minus the rotated n(u), b(u)
    R = np.diag([1.0, -1.0, -1.0])
    Fm = F[:0:-1] @ R
    Fm[:, 1:, :] *= -1
    frames = np.concatenate([Fm, F])
    s = ds * np.arange(-steps, steps + 1, dtype=float)
    T, n, b = frames[:, 0, :], frames[:, 1, :], frames[:, 2, :]

    # Hermite quadrature of X' = T using T' = c0 n / sqrt(t): fourth order
    dX = ds / 2 * (T[1:] + T[:-1]) - ds * ds / 12 * (c0 / rt) * (n[1:] - n[:-1])
    X = np.concatenate([np.zeros((1, 3)), np.cumsum(dX, axis=0)])
    X += 2 * c0 * rt * b[steps] - X[steps]

    k = max(1, int(round(tail * steps)))
    A_plus = renormalize_h2(T[-k:].mean(axis=0))
    A_minus = renormalize_h2(T[:k].mean(axis=0))
    return SelfSimilarSolution(c0=float(c0), t=float(t), s=s, T=T, n=n, b=b, X=X,
                               A_minus=A_minus, A_plus=A_plus,
                               meta={"ds": ds, "s_max": steps * ds, "tail": tail})


def frame_drift(sol):
    """Largest deviation of the frame from ``o``-orthonormality."""
    T, n, b = sol.T, sol.n, sol.b
    errs = [mink_dot(T, T) + 1, mink_dot(n, n) - 1, mink_dot(b, b) - 1,
            mink_dot(T, n), mink_dot(T, b), mink_dot(n, b)]
    return float(max(np.max(np.abs(e)) for e in errs))


def _bisector_frame(a_minus, a_plus):
    """Orthonormal frame (bisector, half-difference, cross) of two H^2 points."""
    m = a_minus + a_plus
    m = m / math.sqrt(-float(mink_dot(m, m)))
    d = a_plus - a_minus
    d = d / math.sqrt(float(mink_dot(d, d)))
    return np.column_stack([m, d, mink_cross(m, d)])


@dataclass
class MatchedCorner:
    """One-corner solution rotated onto a polygon corner."""

    L: np.ndarray
    X0: np.ndarray
    s: np.ndarray
    T: np.ndarray
    X: np.ndarray
    A_minus: np.ndarray
    A_plus: np.ndarray
    mismatch: float


def polygon_corner(spec):
    """Side tangents before and after the corner at ``s = 0`` and its position."""
    t_minus, t_plus = side_tangents(spec, np.array([-1, 0]))
    return t_minus, t_plus, vertices(spec, 0)


def match_to_polygon(sol, spec, tol=1e-4):
    """Rotate a one-corner solution onto the corner of ``spec`` at ``s = 0``.

    The Lorentz map sends the bisector and half-difference of the solution's
    asymptotes to those of the polygon's adjacent side tangents, so it is
    exactly metric preserving; when the two corner angles agree the
    asymptotes land on the side tangents.

    Raises
    ------
    AsymptoteMismatch
        If ``cosh`` of the two corner angles differs by more than ``tol``
        relative.
    """
    t_minus, t_plus, X0 = polygon_corner(spec)
    want = -float(mink_dot(t_minus, t_plus))
    have = -float(mink_dot(sol.A_minus, sol.A_plus))
    mismatch = abs(have - want) / want
    if mismatch > tol:
        raise AsymptoteMismatch(
            f"corner angle cosh {have:.8g} vs polygon {want:.8g} (relative {mismatch:.2e})")
    L = _bisector_frame(t_minus, t_plus) @ np.linalg.inv(_bisector_frame(sol.A_minus, sol.A_plus))
    return MatchedCorner(L=L, X0=X0, s=sol.s, T=sol.T @ L.T, X=X0 + sol.X @ L.T,
                         A_minus=L @ sol.A_minus, A_plus=L @ sol.A_plus, mismatch=mismatch)


def estimate_c_theta0(spec, q):
    """Difference-quotient estimate of the corner amplitude from the algebraic tangent.

    Requires ``q`` divisible by 4.
    """
    if q % 4:
        raise HelipolyError(f"q = {q} must be divisible by 4")
    return estimate_difference_quotient(spec, q)
