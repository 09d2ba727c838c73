"""Direct numerical evolution of ``T_t = T ^ T_ss`` and ``X_t = T ^ T_s``.

Two space discretizations share one classical RK4 time stepper:

* CHP, periodic: pseudo-spectral derivatives. With the M-fold symmetry
  only one sector of ``N/M`` nodes is evolved; ``T1`` then carries the
  wavenumbers ``M j`` and ``T2 + i T3`` the wavenumbers ``M j + 1``.
* HHP, truncated: centred finite differences, ``T`` frozen at both ends.

``T`` is projected back onto H^2 after every step. The inner loops are
compiled with numba; :func:`rhs_tangent` is a plain numpy version of the
same right-hand side used to cross-check the kernels.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field
from enum import Enum

import numba as nb
import numpy as np

from .errors import BadDiscretization, BlowUp, EmptyWindow, NotDivisible, TooFewNodes
from .mink import mink_cross, mink_dot, renormalize_h2
from .polygon import Boundary, CurveState

DEFAULT_C = 0.25


class Scheme(str, Enum):
    SPECTRAL = "SpectralPeriodic"
    FINITE_DIFFERENCE = "FiniteDifferenceFixed"


@dataclass
class SolverConfig:
    """Discretization of one evolution.

    ``Nt`` is optional; when omitted the number of steps follows from the
    bound ``dt <= C * ds**2``. A given ``Nt`` that violates the bound is
    rejected.
    """

    N: int
    t_end: float
    Nt: int | None = None
    scheme: Scheme | None = None
    C: float = DEFAULT_C
    renormalize_every: int = 1
    record_every: int = 1
    use_symmetry: bool = True

    def __post_init__(self):
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        if self.renormalize_every != 1:
            raise ValueError("only renormalization after every step is supported")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    def ds(self, spec):
        return spec.length / self.N

    def dt_max(self, spec):
        bound = self.C * self.ds(spec) ** 2
        if self.Nt is None or self.t_end == 0:
            return bound
        dt = self.t_end / self.Nt
        if dt > bound * (1 + 1e-12):
            raise BadDiscretization(
                f"dt = {dt:.3e} exceeds the stability bound {bound:.3e} (C = {self.C})")
        return dt

    def resolve_scheme(self, spec):
        want = Scheme.SPECTRAL if spec.is_chp else Scheme.FINITE_DIFFERENCE
        if self.scheme is not None and Scheme(self.scheme) is not want:
            raise ValueError(f"{spec.kind.value} polygons use the {want.value} scheme")
        return want


# ---------------------------------------------------------------- derivatives


def _wavenumbers(n, M_fold):
    j = np.fft.fftfreq(n, 1.0 / n)
    return M_fold * j


def spectral_second_derivative(values, M_fold=1, shift=0, length=2 * math.pi):
    """Second derivative of periodic samples on ``[0, length)``.

    With ``M_fold > 1``, ``values`` is one sector of ``N/M_fold`` nodes of
    data whose Fourier modes are ``M_fold * j + shift``; use ``shift = 0``
    for sector-periodic data and ``shift = 1`` for ``e^{is}`` times
    sector-periodic data. The result is returned on the same nodes.
    """
    v = np.asarray(values)
    n = v.shape[0]
    if length == 2 * math.pi and M_fold < 1:
        raise NotDivisible("M_fold must be positive")
    k = _wavenumbers(n, M_fold) * (2 * math.pi / length)
    s = length / M_fold * np.arange(n) / n
    ph = np.exp(1j * shift * s * 2 * math.pi / length)
    ph = ph.reshape((n,) + (1,) * (v.ndim - 1))
    kk = (k + shift * 2 * math.pi / length).reshape((n,) + (1,) * (v.ndim - 1))
    out = ph * np.fft.ifft(-(kk ** 2) * np.fft.fft(v * np.conj(ph), axis=0), axis=0)
    return out.real if np.isrealobj(v) and shift == 0 else out


def spectral_full(values, M_fold=1):
    """Second derivative of full-period data using only one sector.

    ``values`` has ``N`` nodes on ``[0, 2 pi)`` and is assumed M-fold
    symmetric; the sector result is tiled back with the symmetry.
    """
    v = np.asarray(values, dtype=float)
    N = v.shape[0]
    if N % M_fold:
        raise NotDivisible(f"N = {N} is not divisible by M = {M_fold}")
    n = N // M_fold
    sec = v[:n]
    out = np.empty_like(v)
    d1 = spectral_second_derivative(sec[:, 0], M_fold, 0)
    w = spectral_second_derivative(sec[:, 1] + 1j * sec[:, 2], M_fold, 1)
    for j in range(M_fold):
        rot = np.exp(2j * np.pi * j / M_fold)
        out[j * n:(j + 1) * n, 0] = d1
        out[j * n:(j + 1) * n, 1] = (rot * w).real
        out[j * n:(j + 1) * n, 2] = (rot * w).imag
    return out


def fd_second_derivative(values, ds):
    """Centred second difference; the two end nodes get zero."""
    v = np.asarray(values, dtype=float)
    if v.shape[0] < 3:
        raise TooFewNodes("the centred stencil needs at least 3 nodes")
    out = np.zeros_like(v)
    out[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / ds ** 2
    return out


def fd_first_derivative(values, ds):
    """Centred first difference, one-sided second order at both ends."""
    v = np.asarray(values, dtype=float)
    if v.shape[0] < 3:
        raise TooFewNodes("the stencil needs at least 3 nodes")
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2 * ds)
    out[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * ds)
    out[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * ds)
    return out


def spectral_first_derivative_full(values):
    v = np.asarray(values, dtype=float)
    N = v.shape[0]
    k = np.fft.fftfreq(N, 1.0 / N)
    k[N // 2] = 0.0 if N % 2 == 0 else k[N // 2]
    return np.fft.ifft(1j * k[:, None] * np.fft.fft(v, axis=0), axis=0).real


def rhs_tangent(state, scheme=None):
    """``T ^ D2 T`` on the full grid of ``state`` (numpy reference)."""
    T = np.asarray(state.T, dtype=float)
    if scheme is None:
        scheme = (Scheme.SPECTRAL if state.boundary is Boundary.PERIODIC_2PI
                  else Scheme.FINITE_DIFFERENCE)
    if Scheme(scheme) is Scheme.SPECTRAL:
        k = np.fft.fftfreq(T.shape[0], 1.0 / T.shape[0])
        D2 = np.fft.ifft(-(k ** 2)[:, None] * np.fft.fft(T, axis=0), axis=0).real
    else:
        D2 = fd_second_derivative(T, state.ds)
    return mink_cross(T, D2)


def rhs_position(state, scheme=None):
    """``T ^ D1 T`` on the full grid of ``state`` (numpy reference)."""
    T = np.asarray(state.T, dtype=float)
    if scheme is None:
        scheme = (Scheme.SPECTRAL if state.boundary is Boundary.PERIODIC_2PI
                  else Scheme.FINITE_DIFFERENCE)
    if Scheme(scheme) is Scheme.SPECTRAL:
        D1 = spectral_first_derivative_full(T)
    else:
        D1 = fd_first_derivative(T, state.ds)
    return mink_cross(T, D1)


# ---------------------------------------------------------------- kernels


@nb.njit(cache=True)
def _cross_into(a0, a1, a2, b0, b1, b2, out, i):
    out[i, 0] = -(a1 * b2 - a2 * b1)
    out[i, 1] = a2 * b0 - a0 * b2
    out[i, 2] = a0 * b1 - a1 * b0


@nb.njit(cache=True)
def _spectral_rhs(T, k1, k2, kw, ph, outT, outX):
    n = T.shape[0]
    t1 = np.empty(n, dtype=np.complex128)
    u = np.empty(n, dtype=np.complex128)
    for i in range(n):
        t1[i] = T[i, 0]
        u[i] = (T[i, 1] + 1j * T[i, 2]) * np.conj(ph[i])
    f1 = np.fft.fft(t1)
    fu = np.fft.fft(u)
    d1_1 = np.fft.ifft(1j * k1 * f1)
    d2_1 = np.fft.ifft(-k2 * f1)
    d1_w = np.fft.ifft(1j * kw * fu)
    d2_w = np.fft.ifft(-(kw * kw) * fu)
    for i in range(n):
        a0, a1, a2 = T[i, 0], T[i, 1], T[i, 2]
        w2 = d2_w[i] * ph[i]
        _cross_into(a0, a1, a2, d2_1[i].real, w2.real, w2.imag, outT, i)
        w1 = d1_w[i] * ph[i]
        _cross_into(a0, a1, a2, d1_1[i].real, w1.real, w1.imag, outX, i)


@nb.njit(cache=True)
def _fd_rhs(T, ds, outT, outX):
    n = T.shape[0]
    inv2 = 1.0 / (ds * ds)
    inv1 = 0.5 / ds
    for c in range(3):
        outT[0, c] = 0.0
        outT[n - 1, c] = 0.0
    for i in range(1, n - 1):
        b0 = (T[i + 1, 0] - 2 * T[i, 0] + T[i - 1, 0]) * inv2
        b1 = (T[i + 1, 1] - 2 * T[i, 1] + T[i - 1, 1]) * inv2
        b2 = (T[i + 1, 2] - 2 * T[i, 2] + T[i - 1, 2]) * inv2
        _cross_into(T[i, 0], T[i, 1], T[i, 2], b0, b1, b2, outT, i)
        b0 = (T[i + 1, 0] - T[i - 1, 0]) * inv1
        b1 = (T[i + 1, 1] - T[i - 1, 1]) * inv1
        b2 = (T[i + 1, 2] - T[i - 1, 2]) * inv1
        _cross_into(T[i, 0], T[i, 1], T[i, 2], b0, b1, b2, outX, i)
    b0 = (-3 * T[0, 0] + 4 * T[1, 0] - T[2, 0]) * inv1
    b1 = (-3 * T[0, 1] + 4 * T[1, 1] - T[2, 1]) * inv1
    b2 = (-3 * T[0, 2] + 4 * T[1, 2] - T[2, 2]) * inv1
    _cross_into(T[0, 0], T[0, 1], T[0, 2], b0, b1, b2, outX, 0)
    m = n - 1
    b0 = (3 * T[m, 0] - 4 * T[m - 1, 0] + T[m - 2, 0]) * inv1
    b1 = (3 * T[m, 1] - 4 * T[m - 1, 1] + T[m - 2, 1]) * inv1
    b2 = (3 * T[m, 2] - 4 * T[m - 1, 2] + T[m - 2, 2]) * inv1
    _cross_into(T[m, 0], T[m, 1], T[m, 2], b0, b1, b2, outX, m)


@nb.njit(cache=True)
def _renormalize(T, start, stop):
    for i in range(start, stop):
        q = -T[i, 0] * T[i, 0] + T[i, 1] * T[i, 1] + T[i, 2] * T[i, 2]
        if not (q < 0.0 and T[i, 0] > 0.0):
            return False
        r = 1.0 / math.sqrt(-q)
        T[i, 0] *= r
        T[i, 1] *= r
        T[i, 2] *= r
    return True


@nb.njit(cache=True)
def _rk4_run(T, X, nsteps, dt, spectral, ds, k1, k2, kw, ph, origin, lo, hi, every,
             rec_X, rec_h, rec_drift):
    """Advance ``nsteps`` RK4 steps in place; returns the failing step or -1."""
    n = T.shape[0]
    # fixed ends have zero rhs; skipping them keeps them bit-identical
    first, last = (0, n) if spectral else (1, n - 1)
    kT = np.empty((4, n, 3))
    kX = np.empty((4, n, 3))
    Ts = np.empty((n, 3))
    r = 0
    for step in range(nsteps):
        for st in range(4):
            if st == 0:
                Ts[:, :] = T
            else:
                f = 0.5 * dt if st < 3 else dt
                for i in range(n):
                    for c in range(3):
                        Ts[i, c] = T[i, c] + f * kT[st - 1, i, c]
            if spectral:
                _spectral_rhs(Ts, k1, k2, kw, ph, kT[st], kX[st])
            else:
                _fd_rhs(Ts, ds, kT[st], kX[st])
        w = dt / 6.0
        for i in range(n):
            for c in range(3):
                T[i, c] += w * (kT[0, i, c] + 2 * kT[1, i, c] + 2 * kT[2, i, c] + kT[3, i, c])
                X[i, c] += w * (kX[0, i, c] + 2 * kX[1, i, c] + 2 * kX[2, i, c] + kX[3, i, c])
        drift = 0.0
        for i in range(n):
            q = -T[i, 0] * T[i, 0] + T[i, 1] * T[i, 1] + T[i, 2] * T[i, 2]
            d = abs(q + 1.0)
            if d > drift:
                drift = d
        if not _renormalize(T, first, last):
            return step
        if (step + 1) % every == 0:
            for c in range(3):
                rec_X[r, c] = X[origin, c]
                acc = 0.0
                for i in range(lo, hi):
                    acc += X[i, c]
                rec_h[r, c] = acc / (hi - lo)
            rec_drift[r] = drift
            r += 1
    return -1


# ---------------------------------------------------------------- driver


@dataclass
class Evolution:
    """Result of :func:`rk4_evolve`.

    ``trace_t``/``trace_X`` hold ``X(0, t)``; ``com`` the centre of mass
    ``h(t)`` (CHP: full period; HHP: inner half of the nodes).
    ``max_step_drift`` is the largest ``|T o T + 1|`` seen before any
    renormalization.
    """

    final: CurveState
    trace_t: np.ndarray
    trace_X: np.ndarray
    com: np.ndarray
    snapshots: dict = field(default_factory=dict)
    max_step_drift: float = 0.0
    steps: int = 0
    wall_time: float = 0.0


class _Layout:
    """Arrays the kernel needs for one polygon kind and grid."""

    def __init__(self, state, spec, use_symmetry):
        self.spec = spec
        self.N = len(state.grid)
        self.spectral = spec.is_chp
        self.ds = state.ds
        if self.spectral:
            fold = spec.M if (use_symmetry and state.symmetry > 1) else 1
            if self.N % fold:
                raise NotDivisible(f"N = {self.N} is not divisible by M = {fold}")
            self.fold = fold
            n = self.N // fold
            k = _wavenumbers(n, fold)
            self.k1 = k.copy()
            if n % 2 == 0:
                self.k1[n // 2] = 0.0
            self.k2 = k * k
            self.kw = k + 1.0
            self.ph = np.exp(1j * state.grid[:n])
            self.n = n
            self.origin = 0
            self.lo, self.hi = 0, n
        else:
            self.fold = 1
            self.n = self.N
            self.k1 = self.k2 = self.kw = np.zeros(1)
            self.ph = np.zeros(1, dtype=np.complex128)
            self.origin = state.origin_index
            inner = (self.N - 1) // 4
            self.lo, self.hi = inner, self.N - inner

    def reduce(self, state):
        # copies: the kernel works in place
        return (np.array(state.T[:self.n], dtype=float, order="C"),
                np.array(state.X[:self.n], dtype=float, order="C"))

    def com_offset(self):
        if self.spectral and self.fold > 1:
            return np.array([math.pi * self.spec.b * (self.fold - 1) / self.fold, 0.0, 0.0])
        return np.zeros(3)

    def com_of(self, h_reduced):
        h = np.array(h_reduced, dtype=float)
        if self.spectral and self.fold > 1:
            h[..., 1:] = 0.0
        return h + self.com_offset()

    def expand(self, T, X, template, t):
        if not (self.spectral and self.fold > 1):
            return CurveState(template.grid.copy(), T.copy(), X.copy(), t, template.boundary,
                              template.symmetry, dict(template.meta))
        M, n = self.fold, self.n
        Tf = np.empty((self.N, 3))
        Xf = np.empty((self.N, 3))
        step = 2 * math.pi * self.spec.b / M
        for j in range(M):
            c, s = math.cos(2 * math.pi * j / M), math.sin(2 * math.pi * j / M)
            R = np.array([[1.0, 0, 0], [0, c, -s], [0, s, c]])
            Tf[j * n:(j + 1) * n] = T @ R.T
            Xf[j * n:(j + 1) * n] = X @ R.T + np.array([j * step, 0.0, 0.0])
        return CurveState(template.grid.copy(), Tf, Xf, t, template.boundary, template.symmetry,
                          dict(template.meta))


def rk4_evolve(state, spec, cfg, stops=()):
    """Evolve ``state`` from ``state.time`` to ``cfg.t_end`` with classical RK4.

    Parameters
    ----------
    state : CurveState
        Full-grid initial state (as from ``sample_initial``).
    spec : PolygonSpec
    cfg : SolverConfig
    stops : sequence of float
        Times at which a full snapshot is stored. The step size is
        adjusted so every stop is hit exactly.

    Raises
    ------
    BlowUp
        If a tangent leaves the future time-like cone.
    """
    cfg.resolve_scheme(spec)
    if cfg.N != len(state.grid) - (0 if spec.is_chp else 1):
        raise BadDiscretization(f"config N = {cfg.N} does not match the state grid")
    lay = _Layout(state, spec, cfg.use_symmetry)
    dt_max = cfg.dt_max(spec)
    t0 = state.time
    marks = sorted({float(s) for s in stops if t0 < s < cfg.t_end} | {float(cfg.t_end)})
    T, X = lay.reduce(state)
    times, traces, coms = [np.array([t0])], [X[lay.origin].copy()[None, :]], []
    coms.append(lay.com_of(X[lay.lo:lay.hi].mean(axis=0))[None, :])
    snapshots = {}
    drift_max, total = 0.0, 0
    t = t0
    started = _time.perf_counter()
    for mark in marks:
        span = mark - t
        if span <= 0:
            snapshots[mark] = lay.expand(T, X, state, t)
            continue
        nsteps = max(1, math.ceil(span / dt_max - 1e-9))
        dt = span / nsteps
        nrec = nsteps // cfg.record_every
        rec_X = np.empty((nrec, 3))
        rec_h = np.empty((nrec, 3))
        rec_d = np.empty(nrec)
        bad = _rk4_run(T, X, nsteps, dt, lay.spectral, lay.ds, lay.k1, lay.k2, lay.kw, lay.ph,
                       lay.origin, lay.lo, lay.hi, cfg.record_every, rec_X, rec_h, rec_d)
        if bad >= 0:
            raise BlowUp(f"tangent left H^2 at t = {t + (bad + 1) * dt:.6g}; "
                         "reduce the time step or the resolution")
        idx = np.arange(1, nrec + 1) * cfg.record_every
        times.append(t + idx * dt)
        traces.append(rec_X)
        coms.append(lay.com_of(rec_h))
        if nrec:
            drift_max = max(drift_max, float(rec_d.max()))
        total += nsteps
        t = mark
        if mark in stops or mark == cfg.t_end:
            snapshots[mark] = lay.expand(T, X, state, t)
    final = lay.expand(T, X, state, t)
    return Evolution(final=final, trace_t=np.concatenate(times), trace_X=np.concatenate(traces),
                     com=np.concatenate(coms), snapshots=snapshots, max_step_drift=drift_max,
                     steps=total, wall_time=_time.perf_counter() - started)


def reverse_state(state, spec):
    """Data whose forward evolution retraces ``state`` backwards in time.

    If ``X(s, t)`` solves the flow then so does ``Q X(-s, -t)`` with
    ``Q = diag(-1, -1, 1)``; its tangent ``diag(1, 1, -1) T(-s)`` stays on
    the future sheet of H^2. Applying the map twice returns the input.
    """
    if spec.is_chp:
        idx = (-np.arange(len(state.grid))) % len(state.grid)
    else:
        idx = np.arange(len(state.grid))[::-1]
    T = state.T[idx] * np.array([1.0, 1.0, -1.0])
    X = state.X[idx] * np.array([-1.0, -1.0, 1.0])
    return CurveState(state.grid.copy(), T, X, -state.time, state.boundary, state.symmetry,
                      dict(state.meta))


# ---------------------------------------------------------------- corner angles


def measure_angle_numeric(state, spec, rt, fraction=None):
    """Angles between consecutive sides of an evolved polygon at ``t_pq``.

    Each side tangent is the renormalized mean of the samples in the
    middle of the side (middle half for the CHP, middle third for the
    HHP). The CHP returns all angles of one period; the HHP only the
    corners in ``[-L/4, L/4)``.

    Returns
    -------
    angles : ndarray
    corners : ndarray
        Arclength of the corner belonging to each angle.
    """
    from .algebraic import dirac_comb_at
    if fraction is None:
        fraction = 0.25 if spec.is_chp else 1.0 / 3.0
    comb = dirac_comb_at(spec, rt)
    c, gap = comb.positions, comb.gap
    s = np.asarray(state.grid, dtype=float)
    T = np.asarray(state.T, dtype=float)
    sides = []
    if spec.is_chp:
        period = 2 * math.pi
        for ci in c:
            off = (s - ci) % period
            mask = (off >= fraction * gap - 1e-12) & (off < (1 - fraction) * gap - 1e-12)
            if not mask.any():
                raise EmptyWindow(f"no grid node in the middle of the side after s = {ci:.6g}")
            sides.append(T[mask].mean(axis=0))
        sides = renormalize_h2(np.array(sides))
        nxt = np.roll(sides, -1, axis=0)
        # angle at corner i+1 between side i and side i+1
        angles = np.arccosh(np.maximum(-mink_dot(sides, nxt), 1.0))
        corners = np.roll(c, -1)
        order = np.argsort(corners % period)
        return angles[order], corners[order] % period
    for lo_c, hi_c in zip(c[:-1], c[1:]):
        mask = (s >= lo_c + fraction * (hi_c - lo_c) - 1e-12) & (s < hi_c - fraction * (hi_c - lo_c) - 1e-12)
        if not mask.any():
            raise EmptyWindow(f"no grid node in the middle of the side after s = {lo_c:.6g}")
        sides.append(T[mask].mean(axis=0))
    sides = renormalize_h2(np.array(sides))
    angles = np.arccosh(np.maximum(-mink_dot(sides[:-1], sides[1:]), 1.0))
    corners = c[1:-1]
    keep = (corners >= -spec.length / 4 - 1e-12) & (corners < spec.length / 4 - 1e-12)
    return angles[keep], corners[keep]
