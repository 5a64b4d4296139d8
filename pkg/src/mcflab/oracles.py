"""Exact mean curvature flow solutions used as ground truth.

Each oracle knows its positions as a function of a material parameter and
time, with the parameter chosen so that points move normally
(``dX/dt = H n``). That makes :func:`oracle_residual` a direct check of the
flow equation. Noncompact oracles are truncated; checks on them should use
``FlowFrame.interior_mask``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import InvalidInput, NumericalFailure
from .frame import (
    FlowFrame,
    FlowHistory,
    build_curve_frame,
    build_rotational_frame,
    index_derivatives,
)

KINDS = ("sphere", "cylinder", "grim-reaper", "bowl", "paperclip")
NONCOMPACT = ("cylinder", "grim-reaper", "bowl")


@dataclass(frozen=True)
class OracleSpec:
    """Declarative description of an exact solution.

    ``scale`` is the initial radius (sphere, cylinder); ``truncation`` bounds
    the parameter domain of noncompact kinds (half-length of the cylinder,
    ``|x|`` cutoff of the grim reaper, radial extent of the bowl).
    """

    kind: str
    d: int = 2
    scale: float = 1.0
    truncation: float | None = None
    resolution: int = 129
    ancient: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown oracle kind {self.kind!r}")
        if not self.scale > 0:
            raise InvalidInput("oracle scale must be positive")
        if self.resolution < 32:
            raise InvalidInput("oracle resolution must be at least 32")
        if self.kind in NONCOMPACT and (self.truncation is None or not math.isfinite(self.truncation)):
            raise InvalidInput(f"{self.kind} needs a finite truncation")
        if self.kind in ("grim-reaper", "paperclip") and self.d != 1:
            raise InvalidInput(f"{self.kind} is a plane curve (d = 1)")
        if self.kind in ("cylinder", "bowl") and self.d < 2:
            raise InvalidInput(f"{self.kind} needs d >= 2")
        if self.kind == "grim-reaper" and not 0 < self.truncation < math.pi / 2:
            raise InvalidInput("grim reaper truncation must lie in (0, pi/2)")


def _with_fields(frame: FlowFrame, lam, gradH, lapH, normal=None) -> FlowFrame:
    lam = np.asarray(lam, dtype=float)
    return frame.replace_fields(
        lam=lam,
        H=lam.sum(axis=1),
        A2=(lam**2).sum(axis=1),
        gradH=np.asarray(gradH, dtype=float),
        lapH=np.asarray(lapH, dtype=float),
        normal2=frame.normal2 if normal is None else np.asarray(normal, dtype=float),
    )


# --------------------------------------------------------------------------
# sphere
# --------------------------------------------------------------------------

def sphere_radius(d, r0, t, ancient=False):
    """Radius of the shrinking d-sphere at time ``t``."""
    if ancient:
        if t >= 0:
            raise InvalidInput("ancient sphere needs t < 0")
        return math.sqrt(-2.0 * d * t)
    if t >= r0**2 / (2.0 * d):
        raise InvalidInput(f"t = {t} is at or after extinction {r0**2 / (2.0 * d)}")
    return math.sqrt(r0**2 - 2.0 * d * t)


def _sphere_param(spec):
    if spec.d == 1:
        return np.arange(spec.resolution) * (2.0 * math.pi / spec.resolution)
    return np.linspace(0.0, math.pi, spec.resolution)


def _sphere_position(spec, theta, t):
    r = sphere_radius(spec.d, spec.scale, t, spec.ancient)
    if spec.d == 1:
        return r * np.column_stack([np.cos(theta), np.sin(theta)])
    return r * np.column_stack([-np.cos(theta), np.sin(theta)])


def _sphere_hvec(spec, theta, t):
    r = sphere_radius(spec.d, spec.scale, t, spec.ancient)
    return -(spec.d / r**2) * _sphere_position(spec, theta, t)


def sphere_frame(d, r0=1.0, t=0.0, ancient=False, resolution=129, analytic=True) -> FlowFrame:
    """Shrinking round sphere ``r(t) = sqrt(r0^2 - 2 d t)``.

    In ancient mode the radius is ``sqrt(-2 d t)`` and ``r0`` is ignored.
    ``d = 1`` gives the shrinking circle as a closed curve frame.
    """
    spec = OracleSpec("sphere", d=d, scale=r0, resolution=resolution, ancient=ancient)
    return oracle_frame(spec, t, analytic)


# --------------------------------------------------------------------------
# cylinder
# --------------------------------------------------------------------------

def cylinder_radius(d, r0, t, ancient=False):
    if ancient:
        if t >= 0:
            raise InvalidInput("ancient cylinder needs t < 0")
        return math.sqrt(-2.0 * (d - 1) * t)
    if t >= r0**2 / (2.0 * (d - 1)):
        raise InvalidInput("t is at or after the cylinder's extinction time")
    return math.sqrt(r0**2 - 2.0 * (d - 1) * t)


def _cylinder_position(spec, x, t):
    R = cylinder_radius(spec.d, spec.scale, t, spec.ancient)
    return np.column_stack([x, np.full_like(x, R)])


def _cylinder_hvec(spec, x, t):
    R = cylinder_radius(spec.d, spec.scale, t, spec.ancient)
    return np.column_stack([np.zeros_like(x), np.full_like(x, -(spec.d - 1) / R)])


def cylinder_frame(d, r0=1.0, t=0.0, truncation=5.0, ancient=False, resolution=129, analytic=True) -> FlowFrame:
    """Round cylinder S^{d-1} x R of half-length ``truncation``."""
    spec = OracleSpec("cylinder", d=d, scale=r0, truncation=truncation, resolution=resolution, ancient=ancient)
    return oracle_frame(spec, t, analytic)


# --------------------------------------------------------------------------
# grim reaper  y = t - log cos x
# --------------------------------------------------------------------------

def _gd(s):
    return 2.0 * np.arctan(np.tanh(0.5 * s))


def _grim_param(spec, t):
    # uniform arclength samples; the label p satisfies x(p, t) = atan(p e^{-t})
    S = math.log(1.0 / math.cos(spec.truncation) + math.tan(spec.truncation))
    x = _gd(np.linspace(-S, S, spec.resolution))
    return np.tan(x) * math.exp(t)


def _grim_x(p, t):
    return np.arctan(p * math.exp(-t))


def _grim_position(spec, p, t):
    x = _grim_x(p, t)
    return np.column_stack([x, t - np.log(np.cos(x))])


def _grim_hvec(spec, p, t):
    x = _grim_x(p, t)
    c = np.cos(x)
    return np.column_stack([-c * np.sin(x), c * c])


def grim_reaper_frame(t=0.0, truncation=1.2, resolution=513, analytic=True) -> FlowFrame:
    """Translating grim reaper on ``|x| <= truncation``, moving up at unit speed."""
    spec = OracleSpec("grim-reaper", d=1, truncation=truncation, resolution=resolution)
    return oracle_frame(spec, t, analytic)


# --------------------------------------------------------------------------
# bowl soliton (rotational translator, d >= 2)
# --------------------------------------------------------------------------

class _BowlProfile:
    """Solution of u'' = (1 + u'^2)(1 - (d-1) u'/r), u(0) = u'(0) = 0.

    The hypersurface ``x = u(r) + t`` translates along +x with unit speed.
    """

    _cache: dict = {}

    def __init__(self, d, r_max):
        self.d = d
        a = 1.0 / (d**3 * (d + 2.0))
        r0 = 1e-3
        y0 = [r0**2 / (2.0 * d) + a * r0**4 / 4.0, r0 / d + a * r0**3]

        def rhs(r, y):
            return [y[1], (1.0 + y[1] ** 2) * (1.0 - (d - 1) * y[1] / r)]

        sol = solve_ivp(rhs, (r0, r_max * 1.01), y0, method="DOP853", rtol=1e-13, atol=1e-15, dense_output=True)
        if not sol.success:
            raise NumericalFailure(f"bowl profile integration failed: {sol.message}")
        self.r0, self.a, self.sol = r0, a, sol

    @classmethod
    def get(cls, d, r_max):
        key = (d, float(r_max))
        if key not in cls._cache:
            cls._cache[key] = cls(d, r_max)
        return cls._cache[key]

    def u(self, r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        small = r < self.r0
        rs = r[small]
        out[small] = rs**2 / (2 * self.d) + self.a * rs**4 / 4
        if np.any(~small):
            out[~small] = self.sol.sol(r[~small])[0]
        return out

    def du(self, r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        small = r < self.r0
        rs = r[small]
        out[small] = rs / self.d + self.a * rs**3
        if np.any(~small):
            out[~small] = self.sol.sol(r[~small])[1]
        return out

    def drift(self, rho, dt):
        """Radial coordinate after normal motion for time ``dt``."""
        if dt == 0:
            return np.array(rho, dtype=float)

        def rhs(_, y):
            p = self.du(np.abs(y)) * np.sign(y)
            return -p / (1.0 + p * p)

        sol = solve_ivp(rhs, (0.0, dt), np.asarray(rho, dtype=float), method="DOP853", rtol=1e-13, atol=1e-15)
        if not sol.success:
            raise NumericalFailure(f"bowl drift integration failed: {sol.message}")
        return sol.y[:, -1]


def _bowl_param(spec, t):
    return np.linspace(0.0, spec.truncation, spec.resolution)


def _bowl_position(spec, rho, t):
    prof = _BowlProfile.get(spec.d, spec.truncation)
    return np.column_stack([prof.u(rho) + t, rho])


def _bowl_hvec(spec, rho, t):
    prof = _BowlProfile.get(spec.d, spec.truncation)
    p = prof.du(rho)
    w2 = 1.0 + p * p
    return np.column_stack([1.0 / w2, -p / w2])


def bowl_frame(d=2, t=0.0, truncation=2.0, resolution=129) -> FlowFrame:
    """Rotationally symmetric translating bowl with its tip at ``x = t``."""
    spec = OracleSpec("bowl", d=d, truncation=truncation, resolution=resolution)
    return oracle_frame(spec, t, analytic=False)


# --------------------------------------------------------------------------
# paperclip (Angenent oval)  e^t cosh x = cos y,  t < 0
# --------------------------------------------------------------------------

def _clip_F(P, t):
    return math.exp(t) * np.cosh(P[..., 0]) - np.cos(P[..., 1])


def _clip_grad(P, t):
    return np.stack([math.exp(t) * np.sinh(P[..., 0]), np.sin(P[..., 1])], axis=-1)


def _clip_ray(alpha, t):
    X = math.acosh(math.exp(-t))
    ca, sa = math.cos(alpha), math.sin(alpha)
    hi = min(X / abs(ca) if ca else math.inf, (math.pi / 2) / abs(sa) if sa else math.inf)
    f = lambda rho: _clip_F(np.array([rho * ca, rho * sa]), t)
    if f(hi) <= 0:
        return hi
    return brentq(f, 0.0, hi, xtol=1e-15, rtol=1e-15)


def _clip_points(alpha, t):
    rho = np.array([_clip_ray(a, t) for a in alpha])
    return rho[:, None] * np.column_stack([np.cos(alpha), np.sin(alpha)])


def _clip_param(spec, t):
    # polar angles giving uniform arclength
    m = 8 * spec.resolution
    a = np.arange(m + 1) * (2 * math.pi / m)
    P = _clip_points(a[:-1], t)
    P = np.vstack([P, P[:1]])
    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(P, axis=0), axis=1))])
    targets = np.arange(spec.resolution) * (cum[-1] / spec.resolution)
    return np.interp(targets, cum, a)


def _clip_position(spec, alpha, t):
    return _clip_points(alpha, t)


def _clip_curvature(P, t):
    e = math.exp(t)
    fx, fy = e * np.sinh(P[:, 0]), np.sin(P[:, 1])
    fxx, fyy = e * np.cosh(P[:, 0]), np.cos(P[:, 1])
    g = np.hypot(fx, fy)
    kappa = (fxx * fy**2 + fyy * fx**2) / g**3
    normal = -np.column_stack([fx, fy]) / g[:, None]
    return kappa, normal


def _clip_hvec(spec, alpha, t):
    kappa, normal = _clip_curvature(_clip_points(alpha, t), t)
    return kappa[:, None] * normal


def paperclip_frame(t=-1.0, resolution=256, analytic=True) -> FlowFrame:
    """Ancient oval ``e^t cosh x = cos y``; shrinks to a point at t = 0."""
    spec = OracleSpec("paperclip", d=1, resolution=resolution, ancient=True)
    return oracle_frame(spec, t, analytic)


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

def _check_time(spec, t):
    if spec.kind == "paperclip" and t >= 0:
        raise InvalidInput("the paperclip exists only for t < 0")
    if spec.kind == "sphere":
        sphere_radius(spec.d, spec.scale, t, spec.ancient)
    if spec.kind == "cylinder":
        cylinder_radius(spec.d, spec.scale, t, spec.ancient)


def oracle_parameters(spec, t):
    """Material parameters of the samples of ``spec`` at time ``t``."""
    _check_time(spec, t)
    if spec.kind == "sphere":
        return _sphere_param(spec)
    if spec.kind == "cylinder":
        return np.linspace(-spec.truncation, spec.truncation, spec.resolution)
    if spec.kind == "grim-reaper":
        return _grim_param(spec, t)
    if spec.kind == "bowl":
        return _bowl_param(spec, t)
    return _clip_param(spec, t)


def oracle_positions(spec, p, t):
    _check_time(spec, t)
    fn = {
        "sphere": _sphere_position,
        "cylinder": _cylinder_position,
        "grim-reaper": _grim_position,
        "bowl": _bowl_position,
        "paperclip": _clip_position,
    }[spec.kind]
    return fn(spec, p, t)


def oracle_curvature_vector(spec, p, t):
    _check_time(spec, t)
    fn = {
        "sphere": _sphere_hvec,
        "cylinder": _cylinder_hvec,
        "grim-reaper": _grim_hvec,
        "bowl": _bowl_hvec,
        "paperclip": _clip_hvec,
    }[spec.kind]
    return fn(spec, p, t)


def oracle_frame(spec: OracleSpec, t: float, analytic: bool = True) -> FlowFrame:
    """Sampled frame of ``spec`` at time ``t``.

    With ``analytic=True`` curvature fields come from closed forms wherever
    they exist; otherwise everything is computed by the finite-difference
    kernel from the exact positions.
    """
    p = oracle_parameters(spec, t)
    P = oracle_positions(spec, p, t)
    n = P.shape[0]
    if spec.d == 1:
        closed = spec.kind in ("sphere", "paperclip")
        frame = build_curve_frame(P, t, closed=closed, resample=False)
    else:
        frame = build_rotational_frame(P, spec.d, t, resample=False)
    if not analytic:
        return frame

    if spec.kind == "sphere":
        r = sphere_radius(spec.d, spec.scale, t, spec.ancient)
        return _with_fields(frame, np.full((n, spec.d), 1.0 / r), np.zeros((n, spec.d)), np.zeros(n))
    if spec.kind == "cylinder":
        R = cylinder_radius(spec.d, spec.scale, t, spec.ancient)
        lam = np.full((n, spec.d), 1.0 / R)
        lam[:, 0] = 0.0
        return _with_fields(frame, lam, np.zeros((n, spec.d)), np.zeros(n))
    if spec.kind == "grim-reaper":
        x = _grim_x(p, t)
        c, s = np.cos(x), np.sin(x)
        normal = np.column_stack([-s, c])
        return _with_fields(frame, c[:, None], (-s * c)[:, None], -np.cos(2 * x) * c, normal)
    if spec.kind == "paperclip":
        kappa, normal = _clip_curvature(P, t)
        # closed-form curvature, derivatives along the exact sample positions
        x_u, x_uu = index_derivatives(P[:, 0], frame.ends)
        y_u, y_uu = index_derivatives(P[:, 1], frame.ends)
        sigma = np.hypot(x_u, y_u)
        sigma_u = (x_u * x_uu + y_u * y_uu) / sigma
        k_u, k_uu = index_derivatives(kappa, frame.ends)
        k_s = k_u / sigma
        k_ss = (k_uu - k_s * sigma_u) / sigma**2
        return _with_fields(frame, kappa[:, None], k_s[:, None], k_ss, normal)
    return frame


def oracle_history(spec: OracleSpec, times, analytic: bool = True) -> FlowHistory:
    """Frames of ``spec`` at each of ``times`` (strictly increasing)."""
    return FlowHistory(tuple(oracle_frame(spec, float(t), analytic) for t in times), reason="oracle")


def oracle_residual(spec: OracleSpec, t: float, dt_probe: float = 1e-4) -> float:
    """Max over samples of |central-difference velocity - H vector|.

    Points are matched by their material parameter, which the oracles choose
    so that motion is purely normal. The paperclip has no convenient
    closed-form normal parameterisation; its samples are matched by
    intersecting the normal line with the neighbouring time slices.
    """
    if dt_probe <= 0:
        raise InvalidInput("dt_probe must be positive")
    _check_time(spec, t - dt_probe)
    _check_time(spec, t + dt_probe)
    p = oracle_parameters(spec, t)
    hvec = oracle_curvature_vector(spec, p, t)
    if spec.kind == "paperclip":
        P = oracle_positions(spec, p, t)
        _, normal = _clip_curvature(P, t)
        shifts = [_normal_line_hit(P, normal, t + sgn * dt_probe) for sgn in (1.0, -1.0)]
        vel = ((shifts[0] - shifts[1]) / (2 * dt_probe))[:, None] * normal
    elif spec.kind == "bowl":
        prof = _BowlProfile.get(spec.d, spec.truncation)
        ahead = prof.drift(p, dt_probe)
        behind = prof.drift(p, -dt_probe)
        Xa = np.column_stack([prof.u(ahead) + t + dt_probe, ahead])
        Xb = np.column_stack([prof.u(behind) + t - dt_probe, behind])
        vel = (Xa - Xb) / (2 * dt_probe)
    else:
        vel = (oracle_positions(spec, p, t + dt_probe) - oracle_positions(spec, p, t - dt_probe)) / (2 * dt_probe)
    return float(np.max(np.linalg.norm(vel - hvec, axis=1)))


def _normal_line_hit(P, normal, t):
    s = np.zeros(P.shape[0])
    for _ in range(30):
        Q = P + s[:, None] * normal
        F = _clip_F(Q, t)
        dF = np.sum(_clip_grad(Q, t) * normal, axis=1)
        step = F / dF
        s -= step
        if np.max(np.abs(step)) < 1e-16:
            break
    return s
