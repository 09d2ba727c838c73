"""Circular and hyperbolic helical polygons as initial data.

A circular helical polygon (CHP) has ``M`` sides per 2*pi of arclength and
a tangent whose first component is the constant ``b > 1``. A hyperbolic
helical polygon (HHP) has side length ``l`` and a tangent whose third
component is the constant ``b >= 0``; numerically it is truncated to
``M`` sides centred at ``s = 0``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import BadDiscretization, VertexPoint
from .mink import mink_cross, mink_dot


class PolygonKind(str, Enum):
    CHP = "CHP"
    HHP = "HHP"


class Boundary(str, Enum):
    PERIODIC_2PI = "Periodic2Pi"
    FIXED_ENDS = "FixedEnds"


# b slightly above 1 is allowed only for the near-straight-line runs
CHP_MIN_B = 1.0 + 1e-12
# largest Euclidean tangent size we accept for truncated HHPs; beyond it
# renormalization on H^2 loses all significant digits
HHP_MAX_TANGENT = 1e6


@dataclass(frozen=True)
class PolygonSpec:
    """Parameters of a helical polygon plus its derived constants.

    Parameters
    ----------
    kind : PolygonKind
    M : int
        Sides per 2*pi (CHP) or truncation count (HHP, even).
    b : float
        Torsion parameter.
    l : float, optional
        Side length; required for the HHP, forced to ``2*pi/M`` for the CHP.
    """

    kind: PolygonKind
    M: int
    b: float
    l: float | None = None

    def __post_init__(self):
        kind = PolygonKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")
        object.__setattr__(self, "M", int(self.M))
        if kind is PolygonKind.CHP:
            if self.M < 3:
                raise ValueError("a CHP needs M >= 3")
            if not self.b >= CHP_MIN_B:
                raise ValueError(f"CHP requires b > 1, got {self.b!r}")
            if self.l is not None and not math.isclose(self.l, 2 * math.pi / self.M, rel_tol=1e-12):
                raise ValueError("for a CHP the side length is fixed to 2*pi/M")
            object.__setattr__(self, "l", 2 * math.pi / self.M)
        else:
            if self.l is None or not self.l > 0:
                raise ValueError("HHP requires a side length l > 0")
            if self.M % 2:
                raise ValueError("the truncated HHP needs an even number of sides")
            if not self.b >= 0:
                raise ValueError(f"HHP requires b >= 0, got {self.b!r}")
            reach = self.a * math.cosh(self.M * self.l / 2)
            if not reach < HHP_MAX_TANGENT:
                raise ValueError(
                    f"HHP tangent reaches Euclidean size {reach:.3g} at the ends; "
                    "reduce l, M or b")

    @classmethod
    def chp(cls, M, b):
        return cls(PolygonKind.CHP, M, b)

    @classmethod
    def hhp(cls, M, b, l):
        return cls(PolygonKind.HHP, M, b, l)

    @classmethod
    def from_torsion_angle(cls, kind, M, theta0, l=None):
        """Build the polygon whose torsion angle equals ``theta0``."""
        kind = PolygonKind(kind)
        if kind is PolygonKind.CHP:
            b = math.tan(theta0 / 2) / math.tan(math.pi / M)
        else:
            b = math.tan(theta0 / 2) / math.tanh(l / 2)
        return cls(kind, M, b, l)

    @property
    def is_chp(self):
        return self.kind is PolygonKind.CHP

    @property
    def a(self):
        if self.kind is PolygonKind.CHP:
            return math.sqrt((self.b - 1.0) * (self.b + 1.0))
        return math.sqrt(1.0 + self.b * self.b)

    @property
    def side(self):
        """Side length; ``2*pi/M`` for the CHP."""
        return self.l

    @property
    def length(self):
        """Arclength of the simulated window: 2*pi (CHP) or ``M*l`` (HHP)."""
        return 2 * math.pi if self.is_chp else self.M * self.l

    @property
    def rho0(self):
        return curvature_angle(self)

    @property
    def theta0(self):
        return torsion_angle(self)

    @property
    def c0(self):
        return corner_coefficients(self)[0]

    @property
    def c_theta0(self):
        return corner_coefficients(self)[1]

    @property
    def T_f(self):
        return self.l ** 2 / (2 * math.pi)

    def describe(self):
        out = {"kind": self.kind.value, "M": self.M, "b": self.b}
        if not self.is_chp:
            out["l"] = self.l
        return out


@dataclass
class CurveState:
    """A curve sampled on a uniform arclength grid.

    ``T`` and ``X`` have shape ``(n_nodes, 3)``. ``symmetry`` is the
    M-fold rotational symmetry of the CHP (1 when absent).
    """

    grid: np.ndarray
    T: np.ndarray
    X: np.ndarray
    time: float = 0.0
    boundary: Boundary = Boundary.PERIODIC_2PI
    symmetry: int = 1
    meta: dict = field(default_factory=dict)

    @property
    def ds(self):
        return float(self.grid[1] - self.grid[0])

    @property
    def origin_index(self):
        """Index of the node at ``s = 0``."""
        i = int(np.argmin(np.abs(self.grid)))
        if abs(self.grid[i]) > 1e-9 * self.ds:
            raise BadDiscretization("grid has no node at s = 0")
        return i

    def copy(self):
        return replace(self, grid=self.grid.copy(), T=self.T.copy(), X=self.X.copy(),
                       meta=dict(self.meta))


def _side_index(spec, s):
    u = s / spec.l
    k = math.floor(u)
    scale = max(1.0, abs(u))
    if min(u - k, k + 1 - u) < 1e-12 * scale:
        raise VertexPoint(f"s = {s!r} is a vertex; the tangent is undefined there")
    return k


def hhp_side_tangent(spec, k):
    x = spec.l / 2 + k * spec.l
    return np.array([spec.a * math.cosh(x), spec.a * math.sinh(x), spec.b])


def chp_side_tangent(spec, k):
    ang = 2 * math.pi * k / spec.M
    return np.array([spec.b, spec.a * math.cos(ang), spec.a * math.sin(ang)])


def side_tangent(spec, k):
    """Tangent of side ``k``, the side ``k*l < s < (k+1)*l``."""
    return chp_side_tangent(spec, k) if spec.is_chp else hhp_side_tangent(spec, k)


def side_tangents(spec, k):
    """Vectorized :func:`side_tangent` over an integer array."""
    k = np.asarray(k)
    if spec.is_chp:
        ang = 2 * np.pi * k / spec.M
        return np.stack([np.full(k.shape, spec.b), spec.a * np.cos(ang), spec.a * np.sin(ang)],
                        axis=-1)
    x = spec.l / 2 + k * spec.l
    return np.stack([spec.a * np.cosh(x), spec.a * np.sinh(x), np.full(k.shape, spec.b)], axis=-1)


def hhp_tangent(spec, s):
    if spec.is_chp:
        raise ValueError("hhp_tangent needs an HHP spec")
    return hhp_side_tangent(spec, _side_index(spec, s))


def chp_tangent(spec, s):
    if not spec.is_chp:
        raise ValueError("chp_tangent needs a CHP spec")
    return chp_side_tangent(spec, _side_index(spec, s))


def hhp_vertices(spec, k):
    """Vertex ``X(k*l, 0)`` of the HHP.

    The two hyperbolic components carry the factor ``(l/2)/sinh(l/2)``;
    the third grows as ``b*s`` so that vertex chords equal ``l`` times the
    side tangent.
    """
    k = np.asarray(k)
    sk = k * spec.l
    h = spec.l / 2
    pref = h / math.sinh(h) if h > 0 else 1.0
    return np.stack([pref * spec.a * np.sinh(sk), pref * spec.a * np.cosh(sk),
                     spec.b * sk * np.ones_like(sk, dtype=float)], axis=-1)


def chp_vertices(spec, k):
    k = np.asarray(k)
    M, a = spec.M, spec.a
    r = a * math.pi / (M * math.sin(math.pi / M))
    arg = math.pi * (2 * k - 1) / M
    return np.stack([spec.b * 2 * math.pi * k / M, r * np.sin(arg), -r * np.cos(arg)], axis=-1)


def vertices(spec, k):
    return chp_vertices(spec, k) if spec.is_chp else hhp_vertices(spec, k)


def positions(spec, s):
    """Initial curve ``X(s, 0)`` at arbitrary arclengths (piecewise linear)."""
    s = np.asarray(s, dtype=float)
    k = np.floor(s / spec.l).astype(np.int64)
    return vertices(spec, k) + (s - k * spec.l)[..., None] * side_tangents(spec, k)


def curvature_angle(spec):
    half = math.pi / spec.M if spec.is_chp else spec.l / 2
    f = math.sin(half) if spec.is_chp else math.sinh(half)
    return 2 * math.asinh(spec.a * f)


def torsion_angle(spec):
    if spec.is_chp:
        return 2 * math.atan(spec.b * math.tan(math.pi / spec.M))
    return 2 * math.atan(spec.b * math.tanh(spec.l / 2))


def torsion_angle_from_tangents(t_prev, t_mid, t_next):
    """Space-like angle between consecutive osculating planes."""
    u = mink_cross(t_prev, t_mid)
    v = mink_cross(t_mid, t_next)
    c = mink_dot(u, v) / math.sqrt(mink_dot(u, u) * mink_dot(v, v))
    return math.acos(max(-1.0, min(1.0, float(c))))


def corner_coefficients(spec):
    """``(c0, c_theta0)``: delta strengths of the zero-torsion and torsioned polygon.

    ``c0`` uses the planar polygon with the same side length.
    """
    c0 = math.sqrt(2 / math.pi * math.log(math.cosh(spec.l / 2)))
    c_theta0 = math.sqrt(2 / math.pi * math.log(math.cosh(curvature_angle(spec) / 2)))
    return c0, c_theta0


def sample_initial(spec, N):
    """Sample the polygon on the solver grid.

    CHP: ``N`` nodes ``2*pi*k/N`` on ``[0, 2*pi)``, ``N`` a multiple of ``M``.
    HHP: ``N + 1`` nodes on ``[-L/2, L/2]`` with ``L = M*l``.
    A node sitting on a vertex gets the tangent of the side to its right.
    """
    N = int(N)
    if N <= 0 or N % spec.M:
        raise BadDiscretization(f"N = {N} must be a positive multiple of M = {spec.M}")
    n = N // spec.M
    if spec.is_chp:
        idx = np.arange(N)
        grid = 2 * math.pi * idx / N
        side = idx // n
        offset = idx - side * n
        boundary = Boundary.PERIODIC_2PI
        symmetry = spec.M
    else:
        idx = np.arange(N + 1)
        grid = -spec.length / 2 + spec.length * idx / N
        side = idx // n - spec.M // 2
        offset = idx % n
        # the last node closes the curve: keep it on the final side
        side[-1] -= 1
        offset[-1] = n
        boundary = Boundary.FIXED_ENDS
        symmetry = 1
    T = side_tangents(spec, side)
    X = vertices(spec, side) + (offset * spec.l / n)[:, None] * T
    if spec.is_chp:
        grid[idx % n == 0] = side[idx % n == 0] * spec.l
    return CurveState(grid=grid, T=T, X=X, time=0.0, boundary=boundary, symmetry=symmetry,
                      meta={"n_per_side": n})


# flat key = value files, one section per module
def write_config(path, spec, N=None, Nt=None, extra=None):
    cfg = configparser.ConfigParser()
    cfg.optionxform = str
    poly = {"kind": spec.kind.value, "M": str(spec.M), "b": repr(float(spec.b))}
    if not spec.is_chp:
        poly["l"] = repr(float(spec.l))
    cfg["polygon"] = poly
    solver = {}
    if N is not None:
        solver["N"] = str(int(N))
    if Nt is not None:
        solver["Nt"] = str(int(Nt))
    if solver:
        cfg["solver"] = solver
    for section, values in (extra or {}).items():
        cfg[section] = {k: (repr(v) if isinstance(v, float) else str(v)) for k, v in values.items()}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        cfg.write(fh)


def read_config(path):
    """Return ``(spec, solver_dict, parser)`` from a config file."""
    cfg = configparser.ConfigParser()
    cfg.optionxform = str
    if not cfg.read(Path(path), encoding="utf-8"):
        raise FileNotFoundError(path)
    if "polygon" not in cfg:
        raise ValueError(f"{path}: missing [polygon] section")
    poly = cfg["polygon"]
    spec = PolygonSpec(PolygonKind(poly["kind"].strip()), int(poly["M"]), float(poly["b"]),
                       float(poly["l"]) if "l" in poly else None)
    solver = {}
    if "solver" in cfg:
        for key in ("N", "Nt"):
            if key in cfg["solver"]:
                solver[key] = int(cfg["solver"][key])
    return spec, solver, cfg
