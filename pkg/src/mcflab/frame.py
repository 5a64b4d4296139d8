"""Discrete geometry kernel.

Turns sampled plane curves and O(d)-symmetric profiles into :class:`FlowFrame`
objects carrying principal curvatures, mean curvature and its first and second
intrinsic derivatives, quadrature weights and arclength coordinates.

All derivatives are taken with respect to the sample index ``u`` using
fourth-order central stencils and converted to arclength with the chain rule,
so the grid only needs to be a smooth parameterisation, not exactly uniform.
Open (free) chain ends fall back to second-order one-sided stencils; a pole
of a rotational profile is handled by reflecting the profile across the axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import InvalidInput, InvalidProfile, NumericalFailure, UnsupportedFrame

MIN_POINTS = 16
MAX_SPACING_RATIO = 10.0

_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)


@dataclass(frozen=True)
class FramePoint:
    """One sample of an immersed hypersurface.

    ``gradH`` holds the components of the gradient of H in the orthonormal
    principal basis, aligned with ``lam``.
    """

    position: np.ndarray
    normal: np.ndarray
    lam: np.ndarray
    H: float
    A_norm_sq: float
    gradH: np.ndarray
    lapH: float
    area_weight: float
    coord: float
    pole: bool = False

    @property
    def d(self) -> int:
        return self.lam.size


# --------------------------------------------------------------------------
# finite differences
# --------------------------------------------------------------------------

def index_derivatives(f, ends, parity=1.0):
    """First and second derivatives of ``f`` with respect to the sample index.

    Parameters
    ----------
    f : ndarray, shape (n,)
    ends : tuple of str
        Treatment of the (left, right) end: ``"periodic"``, ``"pole"``
        (reflection with the given parity) or ``"free"`` (one-sided).
    parity : float
        +1 for fields that are even across a pole, -1 for odd ones.
    """
    f = np.asarray(f, dtype=float)
    left, right = ends
    if left == "periodic":
        g = np.concatenate([f[-2:], f, f[:2]])
    else:
        lg = np.array([f[2], f[1]]) * parity if left == "pole" else np.full(2, np.nan)
        rg = np.array([f[-2], f[-3]]) * parity if right == "pole" else np.full(2, np.nan)
        g = np.concatenate([lg, f, rg])
    d1 = (g[:-4] - 8.0 * g[1:-3] + 8.0 * g[3:-1] - g[4:]) / 12.0
    d2 = (-g[:-4] + 16.0 * g[1:-3] - 30.0 * g[2:-2] + 16.0 * g[3:-1] - g[4:]) / 12.0
    if left == "free":
        d1[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / 2.0
        d2[0] = 2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]
        d1[1] = (f[2] - f[0]) / 2.0
        d2[1] = f[0] - 2.0 * f[1] + f[2]
    if right == "free":
        d1[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / 2.0
        d2[-1] = 2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]
        d1[-2] = (f[-1] - f[-3]) / 2.0
        d2[-2] = f[-1] - 2.0 * f[-2] + f[-3]
    # exact parity at a pole, so samples on the axis stay there
    for idx, side in ((0, left), (-1, right)):
        if side == "pole":
            if parity > 0:
                d1[idx] = 0.0
            else:
                d2[idx] = 0.0
    return d1, d2


def _arclength_derivatives(f, sigma, sigma_u, ends):
    f_u, f_uu = index_derivatives(f, ends)
    f_s = f_u / sigma
    f_ss = (f_uu - f_s * sigma_u) / sigma**2
    return f_s, f_ss


def _pole_limit(k_rot, ends):
    # Limit of x_u / (sigma r) at the axis. It equals the profile curvature
    # analytically; the value is taken by sixth-order even extrapolation from
    # the neighbours so that H carries no O(h^4) spike into its derivatives.
    if ends[0] == "pole":
        k_rot[0] = 1.5 * k_rot[1] - 0.6 * k_rot[2] + 0.1 * k_rot[3]
    if ends[1] == "pole":
        k_rot[-1] = 1.5 * k_rot[-2] - 0.6 * k_rot[-3] + 0.1 * k_rot[-4]


def _cumulative_arclength(sigma):
    return np.concatenate([[0.0], np.cumsum(0.5 * (sigma[:-1] + sigma[1:]))])


def sphere_area(k: int) -> float:
    """Area of the unit k-sphere S^k."""
    return 2.0 * math.pi ** ((k + 1) / 2.0) / math.gamma((k + 1) / 2.0)


# --------------------------------------------------------------------------
# curvature vector only (used by the time stepper)
# --------------------------------------------------------------------------

def curvature_vector(profile, rep, d, ends):
    """Mean curvature vector H * normal in the plane of ``profile``."""
    x, y = profile[:, 0], profile[:, 1]
    if rep == "curve":
        x_u, x_uu = index_derivatives(x, ends)
        y_u, y_uu = index_derivatives(y, ends)
        sigma = np.hypot(x_u, y_u)
        kappa = (x_u * y_uu - y_u * x_uu) / sigma**3
        normal = np.column_stack([-y_u, x_u]) / sigma[:, None]
        return kappa[:, None] * normal
    x_u, x_uu = index_derivatives(x, ends, 1.0)
    r_u, r_uu = index_derivatives(y, ends, -1.0)
    sigma = np.hypot(x_u, r_u)
    k_prof = (x_uu * r_u - r_uu * x_u) / sigma**3
    with np.errstate(divide="ignore", invalid="ignore"):
        k_rot = x_u / (sigma * y)
    _pole_limit(k_rot, ends)
    H = k_prof + (d - 1) * k_rot
    normal = np.column_stack([r_u, -x_u]) / sigma[:, None]
    return H[:, None] * normal


# --------------------------------------------------------------------------
# the frame type
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FlowFrame:
    """One time slice of a discretised flow.

    For ``rep == "curve"`` the ``profile`` array holds planar positions and
    ``d == 1``. For ``rep == "rot"`` it holds meridian coordinates ``(x, r)``
    of an O(d)-symmetric hypersurface in R^{d+1} with axis along the first
    coordinate. Ambient positions are the profile embedded in the first two
    coordinates minus ``origin``.
    """

    t: float
    d: int
    rep: str
    profile: np.ndarray
    closed: bool
    poles: tuple
    lam: np.ndarray
    H: np.ndarray
    A2: np.ndarray
    gradH: np.ndarray
    lapH: np.ndarray
    weight: np.ndarray
    s: np.ndarray
    label: np.ndarray
    normal2: np.ndarray
    origin: np.ndarray | None = None

    def __post_init__(self):
        for name in ("profile", "lam", "H", "A2", "gradH", "lapH", "weight", "s", "label", "normal2"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.profile.shape[0]

    @property
    def ends(self):
        if self.rep == "curve":
            return ("periodic", "periodic") if self.closed else ("free", "free")
        return tuple("pole" if p else "free" for p in self.poles)

    @property
    def positions(self) -> np.ndarray:
        out = np.zeros((self.n, self.d + 1))
        out[:, :2] = self.profile
        if self.origin is not None:
            out -= self.origin
        return out

    @property
    def normals(self) -> np.ndarray:
        out = np.zeros((self.n, self.d + 1))
        out[:, :2] = self.normal2
        return out

    @cached_property
    def maxH(self) -> float:
        return float(np.max(self.H))

    @cached_property
    def minH(self) -> float:
        return float(np.min(self.H))

    @cached_property
    def max_A2(self) -> float:
        return float(np.max(self.A2))

    @cached_property
    def diameter(self):
        """Extrinsic diameter, or None for open (noncompact) frames."""
        if not self.closed:
            return None
        return frame_diameter(self)

    @cached_property
    def h_min(self) -> float:
        """Smallest chord between neighbouring samples."""
        P = self.profile
        chords = np.linalg.norm(np.diff(P, axis=0), axis=1)
        if self.rep == "curve" and self.closed:
            chords = np.append(chords, np.linalg.norm(P[0] - P[-1]))
        return float(np.min(chords))

    @property
    def length(self) -> float:
        """Total arclength of the curve or profile."""
        return spline_arclength(self)

    def pole_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        if self.rep == "rot":
            mask[0] = self.poles[0]
            mask[-1] = self.poles[1]
        return mask

    def interior_mask(self, margin: float = 0.1) -> np.ndarray:
        """Samples at least ``margin`` of the total arclength away from free ends."""
        mask = np.ones(self.n, dtype=bool)
        L = self.s[-1]
        if self.ends[0] == "free":
            mask &= self.s >= margin * L
        if self.ends[1] == "free":
            mask &= self.s <= (1.0 - margin) * L
        return mask

    def point(self, i: int) -> FramePoint:
        pos = self.positions[i]
        nrm = self.normals[i]
        return FramePoint(
            position=pos,
            normal=nrm,
            lam=np.array(self.lam[i]),
            H=float(self.H[i]),
            A_norm_sq=float(self.A2[i]),
            gradH=np.array(self.gradH[i]),
            lapH=float(self.lapH[i]),
            area_weight=float(self.weight[i]),
            coord=float(self.s[i]),
            pole=bool(self.pole_mask()[i]),
        )

    def points(self) -> list[FramePoint]:
        return [self.point(i) for i in range(self.n)]

    def replace_fields(self, **changes) -> "FlowFrame":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class FlowHistory:
    """Time-ordered frames with the running curvature envelope ``phi``."""

    frames: tuple
    reason: str = "complete"
    steps: int = 0

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise InvalidInput("a history needs at least one frame")
        times = np.array([f.t for f in frames])
        if np.any(np.diff(times) <= 0):
            raise InvalidInput("frame times must be strictly increasing")
        object.__setattr__(self, "frames", frames)

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, k):
        return self.frames[k]

    def __iter__(self):
        return iter(self.frames)

    @cached_property
    def times(self) -> np.ndarray:
        return np.array([f.t for f in self.frames])

    @cached_property
    def maxH(self) -> np.ndarray:
        return np.array([f.maxH for f in self.frames])

    @cached_property
    def phi(self) -> np.ndarray:
        return np.maximum.accumulate(self.maxH)

    def index_of(self, t: float, rtol: float = 1e-9) -> int:
        """Index of the stored frame at time ``t``."""
        times = self.times
        k = int(np.argmin(np.abs(times - t)))
        scale = max(abs(t), abs(times[-1] - times[0]), 1e-300)
        if abs(times[k] - t) > rtol * scale:
            raise InvalidInput(f"time {t!r} is not a stored frame time")
        return k


# --------------------------------------------------------------------------
# frame construction
# --------------------------------------------------------------------------

def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericalFailure("non-finite value in frame fields")


def _curve_frame(P, t, closed, label, origin=None):
    ends = ("periodic", "periodic") if closed else ("free", "free")
    x, y = P[:, 0], P[:, 1]
    x_u, x_uu = index_derivatives(x, ends)
    y_u, y_uu = index_derivatives(y, ends)
    sigma = np.hypot(x_u, y_u)
    if np.any(sigma == 0):
        raise NumericalFailure("zero tangent in curve frame")
    sigma_u = (x_u * x_uu + y_u * y_uu) / sigma
    kappa = (x_u * y_uu - y_u * x_uu) / sigma**3
    normal = np.column_stack([-y_u, x_u]) / sigma[:, None]
    k_s, k_ss = _arclength_derivatives(kappa, sigma, sigma_u, ends)
    weight = sigma.copy()
    if not closed:
        weight[0] *= 0.5
        weight[-1] *= 0.5
    s = _cumulative_arclength(sigma)
    lam = kappa[:, None].copy()
    _check_finite(lam, k_s, k_ss, normal)
    return FlowFrame(
        t=float(t), d=1, rep="curve", profile=np.array(P, dtype=float), closed=closed,
        poles=(False, False), lam=lam, H=lam.sum(axis=1), A2=(lam**2).sum(axis=1),
        gradH=k_s[:, None].copy(), lapH=k_ss, weight=weight, s=s, label=np.array(label, dtype=float),
        normal2=normal, origin=origin,
    )


def _rot_frame(P, d, t, poles, label, origin=None):
    ends = tuple("pole" if p else "free" for p in poles)
    x, r = P[:, 0], P[:, 1]
    x_u, x_uu = index_derivatives(x, ends, 1.0)
    r_u, r_uu = index_derivatives(r, ends, -1.0)
    sigma = np.hypot(x_u, r_u)
    if np.any(sigma == 0):
        raise NumericalFailure("zero tangent in profile")
    sigma_u = (x_u * x_uu + r_u * r_uu) / sigma
    k_prof = (x_uu * r_u - r_uu * x_u) / sigma**3
    pole = np.zeros(P.shape[0], dtype=bool)
    pole[0], pole[-1] = poles
    safe_r = np.where(pole, 1.0, r)
    k_rot = x_u / (sigma * safe_r)
    _pole_limit(k_rot, ends)
    H = k_prof + (d - 1) * k_rot
    H_s, H_ss = _arclength_derivatives(H, sigma, sigma_u, ends)
    r_s = r_u / sigma
    lapH = np.where(pole, d * H_ss, H_ss + (d - 1) * (r_s / safe_r) * H_s)
    normal = np.column_stack([r_u, -x_u]) / sigma[:, None]

    # principal basis sorted ascending; the profile direction sits first among ties
    prof_last = k_rot < k_prof
    lam = np.empty((P.shape[0], d))
    gradH = np.zeros((P.shape[0], d))
    lam[:, :] = k_rot[:, None]
    lam[~prof_last, 0] = k_prof[~prof_last]
    lam[prof_last, d - 1] = k_prof[prof_last]
    gradH[~prof_last, 0] = H_s[~prof_last]
    gradH[prof_last, d - 1] = H_s[prof_last]
    # pole samples are umbilic by construction; the profile derivative is even there
    gradH[pole] = 0.0

    weight = sphere_area(d - 1) * np.abs(r) ** (d - 1) * sigma
    weight[0] *= 0.5
    weight[-1] *= 0.5
    s = _cumulative_arclength(sigma)
    _check_finite(lam, H_s, lapH, normal)
    return FlowFrame(
        t=float(t), d=int(d), rep="rot", profile=np.array(P, dtype=float), closed=bool(poles[0] and poles[1]),
        poles=tuple(bool(p) for p in poles), lam=lam, H=lam.sum(axis=1), A2=(lam**2).sum(axis=1),
        gradH=gradH, lapH=lapH, weight=weight, s=s, label=np.array(label, dtype=float),
        normal2=normal, origin=origin,
    )


def frame_from_profile(template: FlowFrame, profile, t, label=None) -> FlowFrame:
    """Rebuild a frame of the same kind as ``template`` at new positions."""
    label = template.label if label is None else label
    if template.rep == "curve":
        return _curve_frame(profile, t, template.closed, label, template.origin)
    return _rot_frame(profile, template.d, t, template.poles, label, template.origin)


def _default_label(n, closed):
    return np.arange(n) / n if closed else np.arange(n) / (n - 1)


def _validate_chain(P, closed):
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[1] != 2:
        raise InvalidInput("points must have shape (n, 2)")
    if P.shape[0] < MIN_POINTS:
        raise InvalidInput(f"too few points: {P.shape[0]} < {MIN_POINTS}")
    if not np.all(np.isfinite(P)):
        raise InvalidInput("non-finite input coordinates")
    chords = np.linalg.norm(np.diff(P, axis=0), axis=1)
    if closed:
        chords = np.append(chords, np.linalg.norm(P[0] - P[-1]))
    if np.any(chords <= 1e-14 * max(np.max(chords), 1e-300)):
        raise InvalidInput("degenerate input: repeated consecutive points")
    return P, chords


def build_curve_frame(points, t=0.0, closed=True, resample=True, label=None) -> FlowFrame:
    """Frame of a plane curve (d = 1).

    Closed polygons are oriented counter-clockwise so that convex curves get
    positive curvature; open chains keep their order and take the left normal.

    Parameters
    ----------
    points : array_like, shape (n, 2)
        Cyclic sequence of positions (or an open chain if ``closed=False``).
    t : float
        Time stamp of the frame.
    resample : bool
        Redistribute the samples to uniform arclength first.
    """
    P, chords = _validate_chain(points, closed)
    if chords.max() / chords.min() > MAX_SPACING_RATIO:
        raise InvalidInput(f"spacing ratio {chords.max() / chords.min():.3g} exceeds {MAX_SPACING_RATIO}")
    if closed:
        area = 0.5 * np.sum(P[:, 0] * np.roll(P[:, 1], -1) - np.roll(P[:, 0], -1) * P[:, 1])
        if area < 0:
            P = P[::-1].copy()
            if label is not None:
                label = np.asarray(label)[::-1]
    if label is None:
        label = _default_label(P.shape[0], closed)
    frame = _curve_frame(P, t, closed, label)
    if resample:
        frame = resample_arclength(frame, P.shape[0])
    return frame


def build_rotational_frame(profile, d, t=0.0, resample=False, label=None) -> FlowFrame:
    """Frame of an O(d)-symmetric hypersurface from its meridian profile.

    Parameters
    ----------
    profile : array_like, shape (n, 2)
        Open chain of ``(x, r)`` pairs with ``r >= 0``. An endpoint with
        ``r == 0`` is a pole and must meet the axis orthogonally.
    d : int
        Intrinsic dimension, at least 2.
    """
    if int(d) != d or d < 2:
        raise InvalidInput("rotational frames need intrinsic dimension d >= 2")
    P, _ = _validate_chain(profile, closed=False)
    P = P.copy()
    # endpoints within roundoff of the axis are poles
    snap = 1e-12 * np.max(np.abs(P))
    for idx in (0, -1):
        if abs(P[idx, 1]) <= snap:
            P[idx, 1] = 0.0
    r = P[:, 1]
    if np.any(r < 0):
        raise InvalidProfile("negative radius in profile")
    if np.any(r[1:-1] == 0):
        raise InvalidProfile("interior sample on the axis (zero radius)")
    if P[-1, 0] < P[0, 0]:
        P = P[::-1].copy()
        if label is not None:
            label = np.asarray(label)[::-1]
    poles = (bool(P[0, 1] == 0), bool(P[-1, 1] == 0))
    for idx, nxt, nxt2 in ((0, 1, 2), (-1, -2, -3)):
        if P[idx, 1] == 0:
            dx = (-3.0 * P[idx, 0] + 4.0 * P[nxt, 0] - P[nxt2, 0]) / 2.0
            dr = (-3.0 * P[idx, 1] + 4.0 * P[nxt, 1] - P[nxt2, 1]) / 2.0
            if abs(dx) > 0.2 * math.hypot(dx, dr):
                raise InvalidProfile("profile does not meet the axis orthogonally at a pole")
    if label is None:
        label = _default_label(P.shape[0], False)
    frame = _rot_frame(P, d, t, poles, label)
    if resample:
        frame = resample_arclength(frame, P.shape[0])
    return frame


# --------------------------------------------------------------------------
# spline arclength and resampling
# --------------------------------------------------------------------------

class _ProfileSpline:
    """Cubic interpolant of a frame's samples in chord-length parameter."""

    def __init__(self, frame: FlowFrame):
        P = np.asarray(frame.profile)
        self.closed = frame.rep == "curve" and frame.closed
        if self.closed:
            Q = np.vstack([P, P[:1]])
        else:
            Q = P
        chords = np.linalg.norm(np.diff(Q, axis=0), axis=1)
        self.u = np.concatenate([[0.0], np.cumsum(chords)])
        if self.closed:
            self.splines = [CubicSpline(self.u, Q[:, j], bc_type="periodic") for j in range(2)]
        else:
            bcs = []
            for j in range(2):
                sides = []
                for side in frame.ends:
                    if side == "pole":
                        # x is even across the axis, r is odd
                        sides.append((1, 0.0) if j == 0 else (2, 0.0))
                    else:
                        sides.append("not-a-knot")
                bcs.append(tuple(sides))
            self.splines = [CubicSpline(self.u, Q[:, j], bc_type=bcs[j]) for j in range(2)]
        self.labels = np.asarray(frame.label, dtype=float)

    def __call__(self, u):
        return np.stack([s(u) for s in self.splines], axis=-1)

    def speed(self, u):
        return np.hypot(self.splines[0](u, 1), self.splines[1](u, 1))

    def table(self, m=8):
        ug = np.concatenate([np.linspace(a, b, m, endpoint=False) for a, b in zip(self.u[:-1], self.u[1:])])
        ug = np.append(ug, self.u[-1])
        a, b = ug[:-1], ug[1:]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        seg = half * (self.speed(mid[:, None] + half[:, None] * _GL_X) @ _GL_W)
        return ug, np.concatenate([[0.0], np.cumsum(seg)])

    def invert(self, targets, m=8):
        ug, S = self.table(m)
        idx = np.clip(np.searchsorted(S, targets, side="right") - 1, 0, len(S) - 2)
        frac = (targets - S[idx]) / (S[idx + 1] - S[idx])
        u = ug[idx] + frac * (ug[idx + 1] - ug[idx])
        for _ in range(3):
            a = ug[idx]
            mid, half = 0.5 * (u + a), 0.5 * (u - a)
            val = S[idx] + half * (self.speed(mid[:, None] + half[:, None] * _GL_X) @ _GL_W)
            u = u - (val - targets) / self.speed(u)
        return u, S[-1]

    def label_at(self, u):
        n = self.labels.size
        if self.closed:
            lab = np.unwrap(self.labels, period=1.0)
            lab = np.append(lab, lab[0] + 1.0)
            return np.mod(np.interp(u, self.u, lab), 1.0)
        return np.interp(u, self.u, self.labels[:n])


def spline_arclength(frame: FlowFrame) -> float:
    """Total arclength of the cubic interpolant through the samples."""
    return float(_ProfileSpline(frame).table()[1][-1])


def resample_arclength(frame: FlowFrame, n: int) -> FlowFrame:
    """Redistribute samples to uniform arclength and recompute all fields.

    Positions come from a cubic spline through the current samples (chord
    length parameter; periodic for closed curves, reflection-consistent end
    conditions at poles). Material labels are carried along by interpolation.
    """
    if n < MIN_POINTS:
        raise InvalidInput(f"resample count {n} < {MIN_POINTS}")
    sp = _ProfileSpline(frame)
    ug, S = sp.table()
    L = S[-1]
    if sp.closed:
        targets = np.arange(n) * (L / n)
    else:
        targets = np.linspace(0.0, L, n)
    u, _ = sp.invert(targets)
    if not sp.closed:
        u[0], u[-1] = sp.u[0], sp.u[-1]
    P = sp(u)
    if frame.rep == "rot":
        for idx, is_pole in ((0, frame.poles[0]), (-1, frame.poles[1])):
            if is_pole:
                P[idx, 1] = 0.0
    label = sp.label_at(u)
    return frame_from_profile(frame, P, frame.t, label=label)


def frame_diameter(frame: FlowFrame) -> float:
    """Largest distance between two points of a closed frame."""
    if not frame.closed:
        raise UnsupportedFrame("diameter is defined only for closed frames")
    P = np.asarray(frame.profile)
    dx = P[:, None, 0] - P[None, :, 0]
    if frame.rep == "curve":
        dy = P[:, None, 1] - P[None, :, 1]
        return float(np.sqrt(np.max(dx**2 + dy**2)))
    # two meridian points realise either the same-side or the antipodal distance
    rsum = P[:, None, 1] + P[None, :, 1]
    return float(np.sqrt(np.max(dx**2 + rsum**2)))
