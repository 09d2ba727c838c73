import math

import numpy as np
import pytest

from helipoly.algebraic import RationalTime, rho_q
from helipoly.errors import BadDiscretization, EmptyWindow, NotDivisible, TooFewNodes
from helipoly.mink import mink_dot
from helipoly.polygon import Boundary, CurveState, PolygonSpec, sample_initial
from helipoly.solvers import (SolverConfig, _Layout, _fd_rhs, _spectral_rhs, fd_first_derivative,
                              fd_second_derivative, measure_angle_numeric, reverse_state,
                              rhs_position, rhs_tangent, rk4_evolve, spectral_full,
                              spectral_second_derivative)

CHP6 = PolygonSpec.chp(6, 1.2)
HHP48 = PolygonSpec.hhp(48, 0.4, 0.2)


def smooth_symmetric_state(M, N, a=0.6):
    """Smooth tangent with the M-fold symmetry of a circular polygon."""
    s = 2 * math.pi * np.arange(N) / N
    w = a * np.exp(1j * s) * (1 + 0.2 * np.exp(1j * M * s) + 0.1j * np.exp(-2j * M * s))
    T = np.column_stack([np.sqrt(1 + np.abs(w) ** 2), w.real, w.imag])
    X = np.cumsum(T, axis=0) * (2 * math.pi / N)
    return CurveState(s, T, X, 0.0, Boundary.PERIODIC_2PI, M)


def test_spectral_derivative_of_sine():
    s = 2 * math.pi * np.arange(64) / 64
    np.testing.assert_allclose(spectral_second_derivative(np.sin(s)), -np.sin(s), atol=1e-12)
    np.testing.assert_allclose(spectral_second_derivative(np.full(64, 3.0)), 0, atol=1e-12)


def test_spectral_derivative_of_plane_wave():
    s = 2 * math.pi * np.arange(128) / 128
    for k in (1, 5, 17, -30):
        f = np.exp(1j * k * s)
        np.testing.assert_allclose(spectral_second_derivative(f), -k * k * f, atol=1e-9)


@pytest.mark.parametrize("M", [3, 6, 10])
def test_sector_reduction_matches_full_grid(M):
    T = smooth_symmetric_state(M, M * 32).T
    full = np.column_stack([spectral_second_derivative(T[:, c]) for c in range(3)])
    np.testing.assert_allclose(spectral_full(T, M), full, atol=1e-10)
    with pytest.raises(NotDivisible):
        spectral_full(T[:-1], M)


def test_fd_second_derivative_exact_on_quadratics():
    s = np.linspace(-1, 1, 21)
    d = fd_second_derivative(s ** 2, s[1] - s[0])
    np.testing.assert_allclose(d[1:-1], 2.0, rtol=1e-10)
    assert d[0] == d[-1] == 0
    with pytest.raises(TooFewNodes):
        fd_second_derivative(np.zeros(2), 0.1)


def test_fd_second_order_convergence():
    errs = []
    for n in (41, 81):
        s = np.linspace(0, 2, n)
        d = fd_second_derivative(np.sin(s), s[1] - s[0])
        errs.append(np.max(np.abs(d[1:-1] + np.sin(s[1:-1]))))
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)


def test_fd_first_derivative_exact_on_quadratics():
    s = np.linspace(0, 1, 11)
    np.testing.assert_allclose(fd_first_derivative(s ** 2, 0.1), 2 * s, atol=1e-12)


def test_rhs_is_tangent_to_h2():
    state = smooth_symmetric_state(6, 192)
    for rhs in (rhs_tangent(state), rhs_position(state)):
        np.testing.assert_allclose(mink_dot(rhs, state.T), 0, atol=1e-9)


@pytest.mark.parametrize("use_symmetry", [True, False])
def test_spectral_kernel_matches_numpy(use_symmetry):
    M = 6
    state = smooth_symmetric_state(M, M * 32)
    lay = _Layout(state, CHP6, use_symmetry)
    T, _ = lay.reduce(state)
    outT, outX = np.empty_like(T), np.empty_like(T)
    _spectral_rhs(T, lay.k1, lay.k2, lay.kw, lay.ph, outT, outX)
    n = lay.n
    np.testing.assert_allclose(outT, rhs_tangent(state)[:n], atol=1e-9)
    np.testing.assert_allclose(outX, rhs_position(state)[:n], atol=1e-9)


def test_fd_kernel_matches_numpy():
    state = sample_initial(HHP48, 48 * 8)
    state.T = state.T + 1e-3 * np.sin(np.arange(len(state.grid)))[:, None]
    outT, outX = np.empty_like(state.T), np.empty_like(state.T)
    _fd_rhs(np.ascontiguousarray(state.T), state.ds, outT, outX)
    np.testing.assert_allclose(outT, rhs_tangent(state), rtol=1e-12, atol=1e-9)
    np.testing.assert_allclose(outX, rhs_position(state), rtol=1e-12, atol=1e-9)


def test_time_step_bound_enforced():
    cfg = SolverConfig(N=6 * 16, t_end=CHP6.T_f, Nt=10)
    with pytest.raises(BadDiscretization):
        rk4_evolve(sample_initial(CHP6, 96), CHP6, cfg)
    cfg = SolverConfig(N=96, t_end=0.01)
    assert cfg.dt_max(CHP6) == pytest.approx(0.25 * (2 * math.pi / 96) ** 2)


def test_scheme_mismatch_rejected():
    with pytest.raises(ValueError):
        SolverConfig(N=96, t_end=0.01, scheme="FiniteDifferenceFixed").resolve_scheme(CHP6)


def test_straight_line_is_a_fixed_point():
    N = 96
    s = 2 * math.pi * np.arange(N) / N
    T = np.tile([1.0, 0.0, 0.0], (N, 1))
    X = s[:, None] * T
    state = CurveState(s, T, X, 0.0, Boundary.PERIODIC_2PI, 6)
    # a plain line has no pitch b, so evolve the full grid
    ev = rk4_evolve(state, CHP6, SolverConfig(N=N, t_end=0.05, use_symmetry=False))
    np.testing.assert_allclose(ev.final.T, T, atol=1e-13)
    np.testing.assert_allclose(ev.final.X, X, atol=1e-13)


def test_h2_drift_over_one_period():
    N = 6 * 64
    ev = rk4_evolve(sample_initial(CHP6, N), CHP6, SolverConfig(N=N, t_end=CHP6.T_f))
    T = ev.final.T
    assert np.max(np.abs(mink_dot(T, T) + 1)) < 1e-9
    assert np.all(T[:, 0] > 0)


def test_unit_speed_defect_is_first_order():
    # the vertex nodes start with one-sided tangents, which leaves an O(ds)
    # step in X there; away from it the chords converge to unit speed
    medians = []
    for n in (32, 64, 128):
        N = 6 * n
        ev = rk4_evolve(sample_initial(CHP6, N), CHP6, SolverConfig(N=N, t_end=CHP6.T_f / 2))
        chord = np.diff(ev.final.X, axis=0) / ev.final.ds
        medians.append(np.median(np.abs(mink_dot(chord, chord) + 1)))
    assert medians[0] > medians[1] > medians[2]
    assert 1.5 < medians[0] / medians[1] < 2.6
    assert 1.5 < medians[1] / medians[2] < 2.6


def test_symmetry_preserved_without_reduction():
    M, N = 6, 6 * 32
    t_end = CHP6.T_f / 4
    full = rk4_evolve(sample_initial(CHP6, N), CHP6, SolverConfig(N=N, t_end=t_end, use_symmetry=False))
    red = rk4_evolve(sample_initial(CHP6, N), CHP6, SolverConfig(N=N, t_end=t_end))
    T = full.final.T
    n = N // M
    c, s = math.cos(2 * math.pi / M), math.sin(2 * math.pi / M)
    R = np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    np.testing.assert_allclose(T[n:2 * n], T[:n] @ R.T, atol=1e-10)
    np.testing.assert_allclose(red.final.T, T, atol=1e-10)
    np.testing.assert_allclose(red.trace_X, full.trace_X, atol=1e-10)
    np.testing.assert_allclose(red.com, full.com, atol=1e-10)


def test_fd_boundary_values_frozen():
    N = 48 * 8
    state = sample_initial(HHP48, N)
    ev = rk4_evolve(state, HHP48, SolverConfig(N=N, t_end=HHP48.T_f / 4))
    assert np.array_equal(ev.final.T[0], state.T[0])
    assert np.array_equal(ev.final.T[-1], state.T[-1])


def smooth_open_state(N, length):
    s = np.linspace(-length / 2, length / 2, N + 1)
    u = 0.5 * np.tanh(s / 0.4)
    v = 0.4 * np.exp(-(s / 0.4) ** 2)
    T = np.column_stack([np.sqrt(1 + u * u + v * v), u, v])
    X = np.cumsum(T, axis=0) * (s[1] - s[0])
    return CurveState(s, T, X, 0.0, Boundary.FIXED_ENDS, 1)


# RK4 at dt = C ds^2 damps unresolved modes, so reversal is checked on
# smooth data; the polygons themselves carry energy up to the grid scale
@pytest.mark.parametrize("spec,state", [(CHP6, smooth_symmetric_state(6, 6 * 32)),
                                        (HHP48, smooth_open_state(48 * 8, HHP48.length))])
def test_time_reversal(spec, state):
    n = len(state.grid) - (0 if spec.is_chp else 1)
    t = 0.05
    cfg = dict(N=n, use_symmetry=False)
    fwd = rk4_evolve(state, spec, SolverConfig(t_end=t, **cfg)).final
    assert np.max(np.abs(fwd.T - state.T)) > 1e-2
    back = rk4_evolve(reverse_state(fwd, spec), spec, SolverConfig(t_end=0.0, **cfg)).final
    again = reverse_state(back, spec)
    np.testing.assert_allclose(again.T, state.T, atol=1e-5)
    np.testing.assert_allclose(again.X, state.X, atol=1e-5)


def test_reverse_state_is_an_involution():
    state = sample_initial(CHP6, 96)
    twice = reverse_state(reverse_state(state, CHP6), CHP6)
    np.testing.assert_array_equal(twice.T, state.T)
    np.testing.assert_array_equal(twice.X, state.X)


def test_snapshots_hit_stop_times():
    N = 6 * 16
    stops = [CHP6.T_f / 3, CHP6.T_f / 2]
    ev = rk4_evolve(sample_initial(CHP6, N), CHP6, SolverConfig(N=N, t_end=CHP6.T_f / 2), stops)
    assert sorted(ev.snapshots) == stops
    assert ev.snapshots[stops[0]].time == stops[0]
    assert np.all(np.diff(ev.trace_t) > 0)
    assert len(ev.trace_t) == len(ev.trace_X) == len(ev.com) == ev.steps + 1


@pytest.mark.parametrize("spec,n", [(CHP6, 6 * 16), (HHP48, 48 * 12)])
def test_measured_angle_at_time_zero(spec, n):
    angles, _ = measure_angle_numeric(sample_initial(spec, n), spec, RationalTime(0, 1))
    np.testing.assert_allclose(angles, spec.rho0, rtol=1e-10)


def test_measured_angle_needs_resolution():
    with pytest.raises(EmptyWindow):
        measure_angle_numeric(sample_initial(CHP6, 6 * 2), CHP6, RationalTime(1, 3))


def test_measured_angles_cluster_at_third_period():
    N = 6 * 96
    rt = RationalTime(1, 3)
    t = rt.time(CHP6)
    ev = rk4_evolve(sample_initial(CHP6, N), CHP6, SolverConfig(N=N, t_end=t), [t])
    angles, _ = measure_angle_numeric(ev.snapshots[t], CHP6, rt)
    assert len(angles) == 18
    np.testing.assert_allclose(angles, rho_q(CHP6.rho0, 3), rtol=2e-2)
