"""Observables derived from solver traces and algebraic solutions."""

import math
from dataclasses import dataclass, field

import numpy as np

from .algebraic import RationalTime, com_speed, rho_q
from .errors import DomainError, HelipolyError, TooShort
from .polygon import PolygonKind


# conserved product ---------------------------------------------------------

def conserved_product(angles):
    """``prod cosh(rho/2)`` over the given corner angles."""
    angles = np.asarray(angles, dtype=float)
    return float(np.exp(np.sum(np.log(np.cosh(angles / 2)))))


def algebraic_angles(spec, rt):
    """Corner angles of the algebraic solution over the measured side set.

    One period for a circular polygon, the inner ``M/2`` sides for a
    hyperbolic one.
    """
    q = rt.q
    per_side = q if q % 2 else q // 2
    sides = spec.M if spec.is_chp else spec.M // 2
    return np.full(sides * per_side, rho_q(spec.rho0, q))


def initial_product(spec):
    return conserved_product(algebraic_angles(spec, RationalTime(0, 1)))


# centre of mass ------------------------------------------------------------

@dataclass
class ComTrack:
    """Centre-of-mass series and the fitted axial speed."""

    times: np.ndarray
    h: np.ndarray
    speed: float
    transverse: float
    method: str


def com_track(times, h, kind, method="secant"):
    """Axial speed of the centre of mass.

    Parameters
    ----------
    times : ndarray, shape (n,)
    h : ndarray, shape (n, 3)
        Centre of mass at each time (inner nodes for hyperbolic polygons).
    kind : PolygonKind
    method : {"secant", "fit"}
        ``"secant"`` uses the end points, ``"fit"`` a least-squares line.
        The exact centre of mass moves at constant speed, so both estimate
        the same quantity; the secant is less sensitive to the start-up
        transient of the discrete solution.

    Returns
    -------
    ComTrack
        ``speed`` is the slope of ``-h1`` for circular polygons and of
        ``h3`` for hyperbolic ones. ``transverse`` is the largest
        excursion of the other components (circular) or zero.
    """
    times = np.asarray(times, dtype=float)
    h = np.asarray(h, dtype=float)
    if len(times) < 10:
        raise TooShort(f"need at least 10 centre-of-mass samples, got {len(times)}")
    if kind is PolygonKind.CHP:
        axial = -h[:, 0]
        transverse = float(np.max(np.abs(h[:, 1:])))
    else:
        axial = h[:, 2]
        transverse = 0.0
    if method == "secant":
        speed = (axial[-1] - axial[0]) / (times[-1] - times[0])
    elif method == "fit":
        speed = np.polyfit(times, axial, 1)[0]
    else:
        raise HelipolyError(f"unknown method {method!r}")
    return ComTrack(times, h, float(speed), transverse, method)


def relative_speed_error(measured, spec):
    exact = com_speed(spec)
    return abs(measured - exact) / exact


# trajectory of X(0, t) ----------------------------------------------------

def period_cd(c, d, T_f):
    """Recurrence period of ``X(0, t)`` for torsion angle ``pi c / d``."""
    if math.gcd(c, d) != 1:
        raise HelipolyError(f"gcd({c}, {d}) != 1")
    return d * T_f / 2 if (c * d) % 2 else d * T_f


@dataclass
class TrajectoryTransforms:
    """Polar form of the transverse motion and the de-trended axial motion."""

    times: np.ndarray
    R: np.ndarray
    nu: np.ndarray
    axial: np.ndarray


def trajectory_transforms(times, X, spec, c_speed=None):
    """Polar coordinates of ``X(0, t)`` about the polygon axis.

    Circular polygons: ``X2 + i X3 = R e^{i nu}`` with ``nu`` unwrapped and
    axial part ``X1 + c t``. Hyperbolic polygons: ``R = sqrt(X2^2 - X1^2)``,
    ``nu = artanh(X1 / X2)`` and axial part ``X3 - c t``.

    Raises
    ------
    DomainError
        If a hyperbolic trajectory leaves the wedge ``|X1| < |X2|``.
    """
    times = np.asarray(times, dtype=float)
    X = np.asarray(X, dtype=float)
    c = com_speed(spec) if c_speed is None else c_speed
    if spec.is_chp:
        z = X[:, 1] + 1j * X[:, 2]
        return TrajectoryTransforms(times, np.abs(z), np.unwrap(np.angle(z)), X[:, 0] + c * times)
    ratio = X[:, 0] / X[:, 1]
    bad = np.flatnonzero(~(np.abs(ratio) < 1))
    if bad.size:
        i = bad[0]
        raise DomainError(f"|X1/X2| = {abs(ratio[i]):.6g} >= 1 at t = {times[i]:.6g}")
    R = np.sqrt(X[:, 1] ** 2 - X[:, 0] ** 2)
    return TrajectoryTransforms(times, R, np.arctanh(ratio), X[:, 2] - c * times)


def nu_linear_fit(times, nu):
    """Least-squares ``nu(t) = m t + c``; returns ``(m, c)``."""
    m, c = np.polyfit(np.asarray(times, float), np.asarray(nu, float), 1)
    return float(m), float(c)


def stereographic(T):
    """``(T2 / (1 + T1), T3 / (1 + T1))``; maps H^2 into the unit disk."""
    T = np.asarray(T, dtype=float)
    den = 1 + T[..., 0]
    return T[..., 1] / den, T[..., 2] / den


# Riemann-function variants -------------------------------------------------

def _members(values, n_max):
    return sorted({int(v) for v in values if 0 < v <= n_max})


def dominating_set_cd(c, d, n_max):
    """Sorted members of ``{n (n d + c) / 2}`` (``c d`` odd) or ``{n (n d + c)}`` up to ``n_max``."""
    if math.gcd(c, d) != 1:
        raise HelipolyError(f"gcd({c}, {d}) != 1")
    odd = (c * d) % 2
    bound = int(math.isqrt(2 * n_max // max(d, 1) + 1)) + abs(c) + 2
    n = np.arange(-bound, bound + 1)
    v = n * (n * d + c)
    return _members(v // 2 if odd else v, n_max)


def dominating_set_M(M, n_max):
    """Sorted members of ``{1} u {n M +- 1}`` up to ``n_max``."""
    if M < 3:
        raise HelipolyError(f"M = {M} must be at least 3")
    n = np.arange(1, n_max // M + 2)
    return _members(np.concatenate([[1], n * M - 1, n * M + 1]), n_max)


def _first_members(enum, K):
    n_max = max(K, 16)
    while True:
        members = enum(n_max)
        if len(members) >= K:
            return np.array(members[:K], dtype=float)
        n_max *= 4


def riemann_variant_cd(c, d, t, K=2000):
    """``sum_{k in A_cd} exp(2 pi i k t) / k`` over the first ``K`` members."""
    k = _first_members(lambda n: dominating_set_cd(c, d, n), K)
    t = np.asarray(t, dtype=float)
    return _partial_sum(k, k, t)


def riemann_variant_M(M, t, K=1024):
    """``sum_{k in A_M} exp(2 pi i k^2 t) / k^2`` over the first ``K`` members."""
    k = _first_members(lambda n: dominating_set_M(M, n), K)
    return _partial_sum(k * k, k * k, np.asarray(t, dtype=float))


def _partial_sum(freq, weight, t, block=1 << 22):
    """``sum exp(2 pi i f t) / w`` over paired frequencies and weights.

    Works in blocks of at most ``block`` phase evaluations to bound memory.
    """
    tf = np.ravel(t)
    out = np.zeros(tf.shape, dtype=complex)
    nf = max(1, min(len(freq), block // max(1, len(tf))))
    nt = max(1, block // nf)
    for j in range(0, len(tf), nt):
        tj = tf[j:j + nt]
        for i in range(0, len(freq), nf):
            # reduce the phase modulo 1 before multiplying by 2 pi to keep precision
            ph = np.mod(np.outer(tj, freq[i:i + nf]), 1.0)
            out[j:j + nt] += (np.exp(2j * np.pi * ph) / weight[i:i + nf]).sum(axis=1)
    return out.reshape(np.shape(t))


# fingerprints --------------------------------------------------------------

@dataclass
class FingerprintSeries:
    """Fourier coefficients ``b_n``, ``n = 1..n_max``, of one sampled period.

    ``b_n = (1/N) sum_j f_j exp(-2 pi i n j / N)``, so ``sin(2 pi m t) / m``
    gives ``m |b_m| = 1/2``.
    """

    values: np.ndarray
    coeffs: np.ndarray
    dominating: list
    threshold: float
    parseval_defect: float
    scale: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return np.arange(1, len(self.coeffs) + 1)

    @property
    def weighted(self):
        """``n |b_n|``."""
        return self.n * np.abs(self.coeffs)

    def rows(self, members=()):
        """``(n, Re b_n, Im b_n, n|b_n|, in_set)`` rows for CSV output."""
        members = set(members)
        return [(int(n), float(b.real), float(b.imag), float(w), int(n in members))
                for n, b, w in zip(self.n, self.coeffs, self.weighted)]


def detect_dominating(weighted, fraction=0.5, top=0.1, floor=1e-6):
    """Indices (1-based) whose weight exceeds ``fraction`` of the top-``top`` median.

    The threshold never drops below ``floor`` times the largest weight, so
    round-off is not reported when a single mode dominates.
    """
    w = np.asarray(weighted, dtype=float)
    k = max(1, int(math.ceil(top * len(w))))
    thr = max(fraction * float(np.median(np.sort(w)[-k:])), floor * float(w.max(initial=0.0)))
    return [int(i + 1) for i in np.flatnonzero(w > thr)], thr


def fingerprint(values, n_max, scale=1.0, fraction=0.5, top=0.1):
    """Fingerprint of one period sampled uniformly, end point excluded.

    Raises
    ------
    TooShort
        If fewer than ``2 n_max + 1`` samples are given.
    """
    v = scale * np.asarray(values)
    N = v.shape[0]
    if N < 2 * n_max + 1:
        raise TooShort(f"{N} samples cannot resolve {n_max} modes")
    b = np.fft.fft(v) / N
    power = np.mean(np.abs(v) ** 2)
    defect = abs(np.sum(np.abs(b) ** 2) - power) / max(power, np.finfo(float).tiny)
    coeffs = b[1:n_max + 1]
    dom, thr = detect_dominating(np.arange(1, n_max + 1) * np.abs(coeffs), fraction, top)
    return FingerprintSeries(values=v, coeffs=coeffs, dominating=dom, threshold=thr,
                             parseval_defect=float(defect), scale=float(scale))


def resample_period(times, values, n_samples, period=None):
    """Linear resampling of ``values`` onto ``n_samples`` uniform points of one period."""
    times = np.asarray(times, dtype=float)
    period = times[-1] - times[0] if period is None else period
    grid = times[0] + period * np.arange(n_samples) / n_samples
    vals = np.asarray(values)
    if np.iscomplexobj(vals):
        return grid, np.interp(grid, times, vals.real) + 1j * np.interp(grid, times, vals.imag)
    return grid, np.interp(grid, times, vals)


def real_scale(values, reference):
    """Least-squares ``lambda`` with ``lambda (v - mean v) ~ (r - mean r)``."""
    v = np.asarray(values, dtype=float)
    r = np.asarray(reference, dtype=float)
    v = v - v.mean()
    r = r - r.mean()
    return float(np.dot(v, r) / np.dot(v, v))


def scale_to_reference(values, reference, max_samples=1 << 14):
    """:func:`real_scale` against ``reference(tau)`` on ``tau in [0, 1)``.

    ``values`` is one period sampled uniformly without the end point; long
    series are decimated to at most ``max_samples`` points for the fit.
    """
    v = np.asarray(values, dtype=float)
    step = max(1, -(-len(v) // max_samples))
    idx = np.arange(0, len(v), step)
    return real_scale(v[idx], reference(idx / len(v)))


def limit_conjecture_check(params, fingerprints, members, target):
    """Trend of ``n |b_n|`` on a fixed index set across a parameter sweep.

    Parameters
    ----------
    params : sequence
        Parameter values ordered toward the limit.
    fingerprints : sequence of FingerprintSeries
    members : iterable of int
        Indices expected to dominate.
    target : float
        Conjectured limit on ``members``; the rest should approach 0.

    Returns
    -------
    dict
        ``table`` maps each index to its values along the sweep;
        ``monotone`` flags indices whose distance to the limit never grows;
        ``max_member_gap`` and ``max_other`` summarise the last point.
    """
    if len(fingerprints) < 3:
        raise TooShort("need at least 3 parameter points")
    members = sorted(set(members))
    n_max = min(len(f.coeffs) for f in fingerprints)
    table, monotone = {}, {}
    for n in range(1, n_max + 1):
        vals = [float(f.weighted[n - 1]) for f in fingerprints]
        goal = target if n in members else 0.0
        dist = np.abs(np.array(vals) - goal)
        table[n] = vals
        monotone[n] = bool(np.all(np.diff(dist) <= 1e-12))
    last = fingerprints[-1].weighted
    inside = [n for n in members if n <= n_max]
    others = [n for n in range(1, n_max + 1) if n not in set(inside)]
    return {
        "params": list(params),
        "target": target,
        "table": table,
        "monotone": monotone,
        "max_member_gap": float(max(abs(last[n - 1] - target) for n in inside)) if inside else 0.0,
        "max_other": float(max(last[n - 1] for n in others)) if others else 0.0,
    }


# b -> 1 comparison with phi_M -------------------------------------------------

def z_projection(times, X, spec, c_speed=None):
    """Stereographic-type projection of ``X(0, t)`` rotated by ``pi/2 - pi/M`` clockwise."""
    times = np.asarray(times, dtype=float)
    X = np.asarray(X, dtype=float)
    c = com_speed(spec) if c_speed is None else c_speed
    x1 = X[:, 0] + c * times
    z = (-X[:, 1] + 1j * X[:, 2]) / (1 + x1)
    return z * np.exp(-1j * (math.pi / 2 - math.pi / spec.M))


def affine_fit(target, z):
    """Complex least squares ``target ~ lam z + mu``; returns ``(lam, mu)``."""
    A = np.column_stack([z, np.ones_like(z)])
    (lam, mu), *_ = np.linalg.lstsq(A, target, rcond=None)
    return complex(lam), complex(mu)


@dataclass
class ZFit:
    times: np.ndarray
    z: np.ndarray
    phi: np.ndarray
    lam: complex
    mu: complex
    abs_error: float
    rel_error: float


def z_projection_and_fit(times, X, spec, K=1024, c_speed=None):
    """Compare ``z_M`` over ``t in [0, 2 pi]`` with ``phi_M`` over ``[0, 1]``."""
    times = np.asarray(times, dtype=float)
    z = z_projection(times, X, spec, c_speed)
    phi = riemann_variant_M(spec.M, times / (2 * math.pi), K)
    lam, mu = affine_fit(phi, z)
    err = phi - (lam * z + mu)
    return ZFit(times, z, phi, lam, mu, float(np.max(np.abs(err))),
                float(np.max(np.abs(err / phi))))
