"""Exact evolution of a helical polygon at rational times.

At ``t_pq = T_f * p / q`` the filament function is a comb of Dirac deltas
whose complex coefficients are quadratic Gauss sums. Each delta is a
corner of angle ``rho_q``; chaining the corresponding Lorentz rotations
of the parallel frame rebuilds the tangent, and summing the sides
rebuilds the curve up to a rigid motion, which :func:`align_and_lift`
fixes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DegenerateAxis, NotTimeLike
from .mink import (boost_to_time_axis, causal_class, CausalClass, mink_cross, mink_dot,
                   orthonormal_frame_map)
from .polygon import Boundary, CurveState, positions


class Parity(str, Enum):
    ODD = "Odd"
    Q_HALF_EVEN = "QHalfEven"
    Q_HALF_ODD = "QHalfOdd"


@dataclass(frozen=True)
class RationalTime:
    """Rational time ``t_pq = T_f * p / q`` with ``gcd(p, q) = 1``."""

    p: int
    q: int

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 1:
            raise ValueError(f"q must be a positive integer, got {self.q!r}")
        if int(self.p) != self.p or self.p < 0:
            raise ValueError(f"p must be a non-negative integer, got {self.p!r}")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "q", int(self.q))
        if math.gcd(self.p, self.q) != 1:
            raise ValueError(f"p = {self.p} and q = {self.q} are not coprime")

    @property
    def parity(self):
        if self.q % 2:
            return Parity.ODD
        return Parity.Q_HALF_EVEN if (self.q // 2) % 2 == 0 else Parity.Q_HALF_ODD

    def time(self, spec):
        return spec.T_f * self.p / self.q

    @property
    def corners_per_side(self):
        return self.q if self.q % 2 else self.q // 2


def gauss_sum(a, b, c):
    """Brute-force ``sum_{m=0}^{c-1} exp(2 pi i (a m^2 + b m) / c)``."""
    if c < 1:
        raise ValueError("c must be positive")
    m = np.arange(c, dtype=np.int64)
    phase = (a * m * m + b * m) % c
    return complex(np.exp(2j * np.pi * phase / c).sum())


def gauss_sums_all(p, q):
    """``G(-p, m, q)`` for every ``m = 0..q-1`` in ``O(q log q)``."""
    j = np.arange(q, dtype=np.int64)
    f = np.exp(-2j * np.pi * ((p % q) * (j * j % q) % q) / q)
    return q * np.fft.ifft(f)


def rho_q(rho0, q):
    """Corner angle at any rational time with denominator ``q``.

    Solves ``cosh(rho_q/2) = cosh(rho0/2)**e`` with ``e = 1/q`` (q odd)
    or ``2/q`` (q even). ``expm1``/``log1p`` keep full precision when
    ``rho_q`` is tiny, as it is for ``q`` in the thousands.
    """
    e = 1.0 / q if q % 2 else 2.0 / q
    # cosh(x) - 1 = expm1(e * log(cosh(rho0/2)))
    lc = math.log(math.cosh(rho0 / 2))
    d = math.expm1(e * lc)
    # arccosh(1 + d) = log1p(d + sqrt(d (d + 2)))
    return 2 * math.log1p(d + math.sqrt(d * (d + 2)))


def c_theta_q(spec, q):
    """Delta strength at denominator ``q``."""
    return spec.c_theta0 / math.sqrt(q if q % 2 else q / 2)


def galilean_shift(spec, rt):
    """Arclength offset of the corners: ``l * theta0 * p / (pi q)``."""
    return spec.l * spec.theta0 * rt.p / (math.pi * rt.q)


@dataclass
class DiracComb:
    """Corners of the filament function over a window of arclength.

    ``index`` holds the global corner numbers ``m``: corner ``m`` sits at
    ``shift + m * l / q``. ``phases`` exclude the global factor
    ``exp(i theta0^2 p / (2 pi q))``, which is kept in ``global_phase``.
    """

    positions: np.ndarray
    moduli: np.ndarray
    phases: np.ndarray
    index: np.ndarray
    shift: float
    gap: float
    global_phase: float
    rho: float

    def __len__(self):
        return len(self.positions)


def orientation(spec):
    """``+1`` for the CHP, ``-1`` for the HHP.

    The HHP comb is the CHP construction read in reversed arclength: its
    Gauss sums are conjugated and its corners drift towards negative
    ``s``. Both facts are fixed by comparison with the direct solver.
    """
    return 1 if spec.is_chp else -1


def _corner_range(spec, rt, lo, hi):
    step = spec.l / rt.q
    shift = orientation(spec) * galilean_shift(spec, rt)
    m_lo = math.ceil((lo - shift) / step - 1e-9)
    m_hi = math.ceil((hi - shift) / step - 1e-9)
    return np.arange(m_lo, m_hi, dtype=np.int64), step, shift


def dirac_comb_at(spec, rt, window=None, extra=0):
    """Deltas of the filament function at ``t_pq`` inside ``[lo, hi)``.

    The default window is ``[0, 2 pi)`` for the CHP and ``[-L/2, L/2)``
    for the HHP. ``extra`` appends that many further corners past ``hi``.
    Corner ``m`` has coefficient ``(c_theta0 / q) G(-p, m, q) e^{i theta0 m / q}``
    up to the global phase (conjugated, with ``p -> -p``, for the HHP).
    """
    if window is None:
        window = (0.0, 2 * math.pi) if spec.is_chp else (-spec.length / 2, spec.length / 2)
    sigma = orientation(spec)
    m, step, shift = _corner_range(spec, rt, *window)
    G = gauss_sums_all(sigma * rt.p, rt.q)
    live = np.abs(G) > 0.5 * math.sqrt(rt.q)
    m = m[live[m % rt.q]]
    if extra:
        nxt = np.arange(m[-1] + 1, m[-1] + 1 + 2 * extra + 2)
        m = np.concatenate([m, nxt[live[nxt % rt.q]][:extra]])
    coeff = G[m % rt.q]
    phases = sigma * (np.angle(coeff) + spec.theta0 * m / rt.q)
    moduli = spec.c_theta0 * np.abs(coeff) / rt.q
    gap = step if rt.q % 2 else 2 * step
    return DiracComb(positions=shift + m * step, moduli=moduli, phases=phases, index=m,
                     shift=shift, gap=gap,
                     global_phase=spec.theta0 ** 2 * rt.p / (2 * math.pi * rt.q),
                     rho=rho_q(spec.rho0, rt.q))


def corner_matrices(phases, rho):
    """Frame-coordinate jump ``exp(rho * K(0, -sin z, cos z))`` for each phase ``z``.

    The axis is unit space-like, so the exponential is
    ``I + sinh(rho) K + (cosh(rho) - 1) K^2``.
    """
    z = np.asarray(phases, dtype=float)
    c, s = np.cos(z), np.sin(z)
    K = np.zeros(z.shape + (3, 3))
    K[..., 0, 1] = K[..., 1, 0] = c
    K[..., 0, 2] = K[..., 2, 0] = s
    K2 = K @ K
    return np.eye(3) + math.sinh(rho) * K + (math.cosh(rho) - 1.0) * K2


def _fold(R, seed):
    out = np.empty((len(R) + 1, 3, 3))
    out[0] = seed
    F = seed
    for i in range(len(R)):
        F = R[i] @ F
        out[i + 1] = F
    return out


def build_frames(spec, rt, comb=None, seed=None):
    """Parallel frames on every segment of the comb.

    Returns ``(comb, frames)`` with ``frames[i]`` the frame (rows
    ``T, e1, e2``) on the segment ending at corner ``i``; the last entry is
    the frame after the final corner. The frame entering the first corner
    is ``seed`` (the identity by default).
    """
    if comb is None:
        comb = dirac_comb_at(spec, rt)
    seed = np.eye(3) if seed is None else np.asarray(seed, dtype=float)
    frames = _fold(corner_matrices(comb.phases, comb.rho), seed)
    return comb, frames


@dataclass
class AlgebraicCurve:
    """Piecewise-linear curve through the corners of a comb."""

    corners: np.ndarray          # arclength of each corner, ascending
    tangents: np.ndarray         # (n_corners + 1, 3): segment before each corner, then the last
    vertices: np.ndarray         # (n_corners, 3)
    time: float
    meta: dict = field(default_factory=dict)

    def segment_index(self, s):
        """Segment containing ``s``; a corner belongs to the segment on its right."""
        return np.searchsorted(self.corners, np.asarray(s, dtype=float), side="right")

    def tangent(self, s):
        return self.tangents[self.segment_index(s)]

    def position(self, s):
        s = np.asarray(s, dtype=float)
        i = self.segment_index(s)
        base = np.where(i > 0, i - 1, 0)
        anchor = self.corners[base]
        return self.vertices[base] + (s - anchor)[..., None] * self.tangents[i]

    def sample(self, grid, boundary=Boundary.PERIODIC_2PI, symmetry=1):
        grid = np.asarray(grid, dtype=float)
        return CurveState(grid=grid.copy(), T=self.tangent(grid), X=self.position(grid),
                          time=self.time, boundary=boundary, symmetry=symmetry,
                          meta=dict(self.meta))

    def transformed(self, L, offset=0.0):
        return AlgebraicCurve(self.corners, self.tangents @ L.T, self.vertices @ L.T + offset,
                              self.time, dict(self.meta))


def reconstruct_curve(frames, spec, rt, comb):
    """Sum the sides: ``X(c_{i+1}) = X(c_i) + gap * T_i``, with ``X(c_0) = 0``."""
    T = np.ascontiguousarray(frames[:, 0, :])
    gaps = np.diff(comb.positions)
    V = np.zeros((len(comb.positions), 3))
    V[1:] = np.cumsum(gaps[:, None] * T[1:-1], axis=0)
    return AlgebraicCurve(corners=comb.positions.copy(), tangents=T, vertices=V,
                          time=rt.time(spec),
                          meta={"p": rt.p, "q": rt.q, "shift": comb.shift, "rho_q": comb.rho,
                                "c_theta_q": c_theta_q(spec, rt.q)})


def com_speed(spec):
    """Speed of the centre of mass along the polygon axis (``c_M`` or ``c_l``).

    Uses ``tan(pi/M)`` for a circular polygon and ``tanh(l/2)`` for a
    hyperbolic one; both agree with measured speeds to first order in the
    grid spacing.
    """
    lc = 2 * math.log(math.cosh(spec.rho0 / 2))
    if spec.is_chp:
        h = math.pi / spec.M
        return lc / (h * math.tan(h))
    h = spec.l / 2
    return lc / (h * math.tanh(h))


def com_speed_tanh(spec):
    """Centre-of-mass speed with ``tanh`` in both denominators.

    Kept to report how far the all-``tanh`` form sits from measured
    circular-polygon speeds; prefer :func:`com_speed`.
    """
    lc = 2 * math.log(math.cosh(spec.rho0 / 2))
    h = math.pi / spec.M if spec.is_chp else spec.l / 2
    return lc / (h * math.tanh(h))


def _chp_alignment(curve, spec):
    period = 2 * math.pi
    start = curve.corners[0]
    v = curve.position(start + period) - curve.position(start)
    if causal_class(v) is not CausalClass.TIME_LIKE:
        raise DegenerateAxis(f"period translation {v} is not time-like")
    L = boost_to_time_axis(v)
    if (L @ v)[0] < 0:
        L = -L
    return L


def _hhp_alignment(curve, spec):
    L_half, l = spec.length / 2, spec.l
    eps = 1e-9 * l
    u = curve.tangent(-L_half + eps) - curve.tangent(-l + eps)
    w = curve.tangent(L_half - eps) - curve.tangent(l + eps)
    n = mink_cross(u, w)
    nn = float(mink_dot(n, n))
    if not nn > 0:
        raise DegenerateAxis("boundary tangent differences do not span a time-like plane")
    n = n / math.sqrt(nn)
    e1 = np.array([1.0, 0.0, 0.0])
    t = e1 - float(mink_dot(e1, n)) * n
    tt = float(mink_dot(t, t))
    if not tt < 0:
        raise DegenerateAxis("no time-like direction orthogonal to the plane normal")
    t = t / math.sqrt(-tt)
    x = mink_cross(n, t)
    L = orthonormal_frame_map(t, x, n)
    if np.linalg.det(L) < 0:
        L = orthonormal_frame_map(t, -x, n)
    # b >= 0 means the third tangent component is non-negative on average
    if np.mean((curve.tangents @ L.T)[:, 2]) < 0:
        flip = np.diag([1.0, -1.0, -1.0])
        L = flip @ L
    return L


def align_and_lift(curve, spec, rt):
    """Rigidly move the reconstructed curve into the polygon's frame.

    CHP: the period translation is boosted onto ``+e1``; the curve is
    centred so that ``X2`` and ``X3`` have zero mean over a period and
    ``X1`` has mean ``b pi - c_M t``. HHP: the plane spanned by the two
    boundary tangent differences is mapped to ``x3 = 0``; over the inner
    half ``X3`` has mean ``c_l t`` while ``X1``, ``X2`` keep the means of the
    initial polygon. One rotation about the polygon axis remains free.
    """
    t = rt.time(spec)
    if spec.is_chp:
        L = _chp_alignment(curve, spec)
        moved = curve.transformed(L)
        lo = curve.corners[0]
        hi = lo + 2 * math.pi
        target = np.array([spec.b * math.pi - com_speed(spec) * t, 0.0, 0.0])
    else:
        L = _hhp_alignment(curve, spec)
        moved = curve.transformed(L)
        lo, hi = -spec.length / 4, spec.length / 4
        target = _hhp_inner_mean_initial(spec) + np.array([0.0, 0.0, com_speed(spec) * t])
    mean = _segment_mean(moved, lo, hi)
    out = moved.transformed(np.eye(3), target - mean)
    out.meta["alignment"] = L
    return out


def _segment_mean(curve, lo, hi):
    """Exact mean of the piecewise-linear curve over ``[lo, hi]``."""
    inside = curve.corners[(curve.corners > lo) & (curve.corners < hi)]
    s = np.concatenate([[lo], inside, [hi]])
    return _trapezoid_mean(curve.position(s), s)


def _trapezoid_mean(X, s):
    # exact for functions linear between consecutive breakpoints
    ds = np.diff(s)
    return (ds[:, None] * (X[1:] + X[:-1]) / 2).sum(axis=0) / (s[-1] - s[0])


def _hhp_inner_mean_initial(spec):
    lo, hi = -spec.length / 4, spec.length / 4
    k = np.arange(math.ceil(lo / spec.l), math.floor(hi / spec.l) + 1)
    s = np.unique(np.concatenate([[lo], k * spec.l, [hi]]))
    return _trapezoid_mean(positions(spec, s), s)


def algebraic_solution(spec, rt, extra=None):
    """Comb, frames and aligned curve at ``t_pq`` in one call."""
    if extra is None:
        extra = rt.corners_per_side if spec.is_chp else 0
    comb = dirac_comb_at(spec, rt, extra=extra)
    _, frames = build_frames(spec, rt, comb)
    curve = reconstruct_curve(frames, spec, rt, comb)
    return align_and_lift(curve, spec, rt)


def best_axis_rotation(T_from, T_to, kind):
    """Rotation about the polygon axis that best maps ``T_from`` onto ``T_to``.

    CHP axis ``e1``: circular rotation, solved in closed form. HHP axis
    ``e3``: boost in the ``(x1, x2)`` plane, solved by Newton iteration on
    light-cone coordinates.
    """
    A, B = np.asarray(T_from, float), np.asarray(T_to, float)
    if kind == "CHP" or getattr(kind, "value", None) == "CHP":
        wa = A[:, 1] + 1j * A[:, 2]
        wb = B[:, 1] + 1j * B[:, 2]
        phi = float(np.angle(np.sum(np.conj(wa) * wb)))
        c, s = math.cos(phi), math.sin(phi)
        return np.array([[1.0, 0, 0], [0, c, -s], [0, s, c]])
    ua, va = A[:, 0] + A[:, 1], A[:, 0] - A[:, 1]
    ub, vb = B[:, 0] + B[:, 1], B[:, 0] - B[:, 1]
    # minimise sum (x ua - ub)^2 + (va / x - vb)^2 over x = exp(eta) > 0
    a2, ab = np.dot(ua, ua), np.dot(ua, ub)
    c2, cd = np.dot(va, va), np.dot(va, vb)
    x = 1.0
    for _ in range(60):
        g = a2 * x - ab - c2 / x ** 3 + cd / x ** 2
        h = a2 + 3 * c2 / x ** 4 - 2 * cd / x ** 3
        step = g / h if h > 0 else 0.1 * np.sign(g)
        x_new = max(x - step, 0.5 * x)
        if abs(x_new - x) < 1e-15 * x:
            x = x_new
            break
        x = x_new
    eta = math.log(x)
    ch, sh = math.cosh(eta), math.sinh(eta)
    return np.array([[ch, sh, 0], [sh, ch, 0], [0, 0, 1.0]])


def hyperbolic_distance(a, b):
    """Distance on H^2: ``arccosh(-a o b)``."""
    c = -mink_dot(a, b)
    return np.arccosh(np.maximum(c, 1.0))


def estimate_difference_quotient(spec, q, gap=None):
    """Centred difference quotient of the algebraic tangent at ``t_{1,q}``.

    Returns ``sqrt(t) * |T(gap) - T(-gap)|_0 / (2 gap)``; the ``sqrt(t)``
    factor makes it converge to ``c_theta0`` as ``q`` grows. ``gap``
    defaults to the corner spacing of the comb.
    """
    rt = RationalTime(1, q)
    if gap is None:
        gap = spec.l / q if q % 2 else 2 * spec.l / q
    comb = dirac_comb_at(spec, rt, window=(-2 * gap, 2 * gap))
    _, frames = build_frames(spec, rt, comb)
    curve = AlgebraicCurve(comb.positions, frames[:, 0, :], np.zeros((len(comb), 3)),
                           rt.time(spec))
    d = curve.tangent(gap) - curve.tangent(-gap)
    norm = math.sqrt(abs(float(mink_dot(d, d))))
    return math.sqrt(rt.time(spec)) * norm / (2 * gap)


def check_on_h2(T, tol=1e-10):
    q = mink_dot(T, T)
    if np.max(np.abs(q + 1)) > tol or np.any(np.asarray(T)[..., 0] <= 0):
        raise NotTimeLike("tangents left H^2")
    return True
