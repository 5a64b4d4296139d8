"""Generalised differential Harnack quantity for mean convex flows.

For a point with principal curvatures ``lam``, mean curvature ``H`` and a
pinching constant ``eps0`` (so that ``lam_i + eps0 H >= 0``) the quantity is

    Z(V) = sum_i (lam_i + eps0 H) V_i^2 + 2 delta <grad H, V>
           + delta^2 dH/dt + H/(2t) + eps0 delta^2 H^3
           + (3 eps0 delta / 4) phi^2 H,        delta = 1 / (1 + eps0 d),

with the time derivative taken from the scalar evolution identity
``dH/dt = lap H + |A|^2 H``. In ancient mode the ``H/(2t)`` term is absent.
Everything works in the orthonormal principal basis, so Z is a diagonal
quadratic in the coefficients of ``V``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisViolated, InvalidInput, UnboundedDirection
from .frame import FlowFrame, FlowHistory, FramePoint

MODES = ("finite-time", "ancient")


@dataclass(frozen=True)
class HarnackParams:
    eps0: float
    d: int
    phi: float
    t: float
    mode: str = "finite-time"

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidInput(f"mode must be one of {MODES}")
        if not self.eps0 >= 0:
            raise InvalidInput("eps0 must be nonnegative")
        if self.d < 1:
            raise InvalidInput("d must be positive")
        if self.mode == "finite-time" and not self.t > 0:
            raise InvalidInput("finite-time mode needs t > 0")
        if self.mode == "ancient" and self.t > 0:
            raise InvalidInput("ancient mode refuses positive times")

    @property
    def delta(self) -> float:
        return 1.0 / (1.0 + self.eps0 * self.d)

    def aux(self) -> dict:
        """Auxiliary time functions f, g of the maximum-principle argument (diagnostics only)."""
        e, dl, ph = self.eps0, self.delta, self.phi
        inv = 1.0 / (2.0 * self.t) if self.mode == "finite-time" else 0.0
        return {"delta": dl, "f": inv + 1.5 * e * dl * ph**2, "g": inv + 0.75 * e * dl * ph**2}


@dataclass(frozen=True)
class HarnackResult:
    V_star: np.ndarray
    Z_min: float
    terms: dict
    regularized: bool = False
    eps: float = 0.0
    grid_spacing: float | None = None
    aux: dict = field(default_factory=dict)


def _check_point(pt: FramePoint, params: HarnackParams):
    if pt.lam.size != params.d:
        raise InvalidInput(f"point has d = {pt.lam.size}, params have d = {params.d}")
    if not pt.H > 0:
        raise HypothesisViolated(f"H = {pt.H} is not positive")
    if params.phi < pt.H * (1 - 1e-9):
        raise InvalidInput(f"phi = {params.phi} is below the point's H = {pt.H}")


def _scalar_terms(H, A2, lapH, eps, params):
    dl = 1.0 / (1.0 + eps * params.d)
    time_term = dl**2 * (lapH + A2 * H)
    inv = H / (2.0 * params.t) if params.mode == "finite-time" else 0.0 * H
    cubic = eps * dl**2 * H**3
    env = 0.75 * eps * dl * params.phi**2 * H
    return dl, time_term, inv, cubic, env


def harnack_quantity(pt: FramePoint, V, params: HarnackParams) -> float:
    """Z(V) at one point."""
    _check_point(pt, params)
    V = np.asarray(V, dtype=float)
    if V.shape != (params.d,):
        raise InvalidInput("V must have one coefficient per principal direction")
    e = params.eps0
    dl, time_term, inv, cubic, env = _scalar_terms(pt.H, pt.A_norm_sq, pt.lapH, e, params)
    quad = float(np.sum((pt.lam + e * pt.H) * V * V))
    grad = 2.0 * dl * float(np.dot(pt.gradH, V))
    return quad + grad + time_term + inv + cubic + env


def _reg_amount(params):
    return 1e-10 * (1.0 + params.eps0 * params.d)


def harnack_min(pt: FramePoint, params: HarnackParams) -> HarnackResult:
    """Closed-form minimiser of Z over tangent directions.

    The stationarity condition ``(lam_i + eps H) V_i + delta dH_i = 0`` is
    solved componentwise. A direction with vanishing coefficient but nonzero
    gradient is regularised by raising eps slightly above eps0; the result
    is then flagged.
    """
    _check_point(pt, params)
    lam, g, H = pt.lam, pt.gradH, pt.H
    eps = params.eps0
    coef = lam + eps * H
    scale = np.abs(lam) + eps * H + H
    if np.any(coef < -1e-12 * scale):
        i = int(np.argmin(coef))
        raise HypothesisViolated(f"lam_{i + 1} + eps0 H = {coef[i]:.3e} < 0: quadratic form is not nonnegative")
    reg = _reg_amount(params)
    regularized = bool(np.any((coef < reg * params.phi) & (g != 0)))
    if regularized:
        eps = params.eps0 + reg
        coef = lam + eps * H
    dl, time_term, inv, cubic, env = _scalar_terms(H, pt.A_norm_sq, pt.lapH, eps, params)
    V = np.zeros_like(lam)
    live = coef > 0
    V[live] = -dl * g[live] / coef[live]
    quad = float(np.sum(coef * V * V))
    grad = 2.0 * dl * float(np.dot(g, V))
    terms = {
        "quadratic": quad,
        "gradient": grad,
        "time-derivative": float(time_term),
        "1/2t": float(inv),
        "cubic": float(cubic),
        "envelope": float(env),
    }
    aux = dict(HarnackParams(eps, params.d, params.phi, params.t, params.mode).aux())
    return HarnackResult(V_star=V, Z_min=sum(terms.values()), terms=terms, regularized=regularized, eps=eps, aux=aux)


def harnack_min_bruteforce(pt: FramePoint, params: HarnackParams, radius: float = 1.0, n_grid: int = 41,
                           max_expansions: int = 8) -> HarnackResult:
    """Grid minimum of Z over ``[-radius, radius]^d``.

    The box doubles while the minimiser sits on its boundary. This is an
    independent check on :func:`harnack_min`; it evaluates Z term by term
    from :func:`harnack_quantity`'s ingredients without using the
    stationarity condition.
    """
    if n_grid < 11:
        raise InvalidInput("n_grid must be at least 11")
    _check_point(pt, params)
    d = params.d
    e = params.eps0
    dl, time_term, inv, cubic, env = _scalar_terms(pt.H, pt.A_norm_sq, pt.lapH, e, params)
    const = time_term + inv + cubic + env
    coef = pt.lam + e * pt.H
    for _ in range(max_expansions + 1):
        axis = np.linspace(-radius, radius, n_grid)
        mesh = np.meshgrid(*([axis] * d), indexing="ij")
        Z = np.full(mesh[0].shape, const)
        for i in range(d):
            Z = Z + coef[i] * mesh[i] ** 2 + 2.0 * dl * pt.gradH[i] * mesh[i]
        idx = np.unravel_index(int(np.argmin(Z)), Z.shape)
        if all(0 < j < n_grid - 1 for j in idx):
            V = np.array([axis[j] for j in idx])
            spacing = axis[1] - axis[0]
            quad = float(np.sum(coef * V * V))
            grad = 2.0 * dl * float(np.dot(pt.gradH, V))
            terms = {
                "quadratic": quad,
                "gradient": grad,
                "time-derivative": float(time_term),
                "1/2t": float(inv),
                "cubic": float(cubic),
                "envelope": float(env),
            }
            return HarnackResult(V_star=V, Z_min=float(Z[idx]), terms=terms, eps=e, grid_spacing=float(spacing))
        radius *= 2.0
    raise UnboundedDirection(f"grid minimiser stays on the boundary up to radius {radius / 2:.3g}")


# --------------------------------------------------------------------------
# frame-level evaluation
# --------------------------------------------------------------------------

def epsilon0_required(history, window=None) -> float:
    """Least eps0 with ``lam_1 + eps0 H >= 0`` on the chosen frames.

    ``window`` is an iterable of frame indices (default: all frames).
    """
    frames = history.frames if isinstance(history, FlowHistory) else tuple(history)
    idx = range(len(frames)) if window is None else window
    worst = 0.0
    seen = False
    for k in idx:
        f = frames[k]
        seen = True
        if np.any(f.H <= 0):
            raise HypothesisViolated(f"nonpositive H in frame {k} (t = {f.t})")
        worst = max(worst, float(np.max(-f.lam[:, 0] / f.H)))
    if not seen:
        raise InvalidInput("empty window")
    return max(0.0, worst)


def zmin_field(frame: FlowFrame, params: HarnackParams):
    """Vectorised closed-form Z_min at every sample of ``frame``.

    Returns ``(zmin, regularized)`` arrays.
    """
    H, lam, g = frame.H, frame.lam, frame.gradH
    if np.any(H <= 0):
        raise HypothesisViolated(f"nonpositive H at t = {frame.t}")
    eps = np.full(frame.n, params.eps0)
    coef = lam + params.eps0 * H[:, None]
    scale = np.abs(lam) + params.eps0 * H[:, None] + H[:, None]
    if np.any(coef < -1e-12 * scale):
        raise HypothesisViolated(f"lam_1 + eps0 H < 0 at t = {frame.t}; eps0 = {params.eps0} is too small")
    reg = _reg_amount(params)
    regularized = np.any((coef < reg * params.phi) & (g != 0), axis=1)
    eps = np.where(regularized, params.eps0 + reg, params.eps0)
    coef = lam + eps[:, None] * H[:, None]
    dl = 1.0 / (1.0 + eps * params.d)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(coef > 0, g * g / coef, 0.0)
    time_term = dl**2 * (frame.lapH + frame.A2 * H)
    inv = H / (2.0 * params.t) if params.mode == "finite-time" else 0.0
    z = -dl**2 * ratio.sum(axis=1) + time_term + inv + eps * dl**2 * H**3 + 0.75 * eps * dl * params.phi**2 * H
    return z, regularized


@dataclass(frozen=True)
class FrameHarnack:
    t: float
    phi: float
    z_min: float
    index: int
    tol: float
    passed: bool
    skipped: bool = False
    regularized: int = 0


def _threads():
    import os

    try:
        return max(1, int(os.environ.get("MCFLAB_THREADS", "1")))
    except ValueError:
        return 1


def harnack_sweep(history: FlowHistory, mode: str = "finite-time", eps0="auto", tol_scale: float = 1e-3,
                  margin: float = 0.1) -> list[FrameHarnack]:
    """Minimum of Z_min over the samples of each frame.

    A frame passes when its minimum is at least ``-tol_scale * phi^3``.
    Frames at ``t <= 0`` are skipped in finite-time mode; open frames are
    restricted to their interior window.
    """
    if eps0 == "auto":
        eps0 = epsilon0_required(history)
    eps0 = float(eps0)
    phis = history.phi

    def one(k):
        frame = history[k]
        phi = float(phis[k])
        tol = tol_scale * phi**3
        if mode == "finite-time" and frame.t <= 0:
            return FrameHarnack(frame.t, phi, math.nan, -1, tol, True, skipped=True)
        params = HarnackParams(eps0, frame.d, phi, frame.t, mode)
        z, reg = zmin_field(frame, params)
        mask = frame.interior_mask(margin) if not frame.closed else np.ones(frame.n, dtype=bool)
        zm = np.where(mask, z, np.inf)
        i = int(np.argmin(zm))
        return FrameHarnack(frame.t, phi, float(zm[i]), i, tol, bool(zm[i] >= -tol), regularized=int(reg.sum()))

    n_workers = min(_threads(), len(history))
    if n_workers > 1:
        with ThreadPoolExecutor(n_workers) as pool:
            return list(pool.map(one, range(len(history))))
    return [one(k) for k in range(len(history))]


# --------------------------------------------------------------------------
# integrated form
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PathEnergy:
    value: float
    path: tuple
    times: tuple


def _arclength_of_label(frame: FlowFrame, labels):
    """Arclength position, in ``frame``'s metric, of material labels."""
    lab = np.asarray(frame.label, dtype=float)
    s = np.asarray(frame.s, dtype=float)
    if frame.rep == "curve" and frame.closed:
        L = s[-1] + np.linalg.norm(frame.profile[0] - frame.profile[-1])
        lu = np.unwrap(lab, period=1.0)
        base = lu[0]
        lu = np.append(lu - base, 1.0)
        sx = np.append(s, L)
        return np.interp(np.mod(np.asarray(labels) - base, 1.0), lu, sx), L
    return np.interp(labels, lab, s), None


def _distance(a, b, period):
    diff = np.abs(a - b)
    if period is None:
        return diff
    diff = np.mod(diff, period)
    return np.minimum(diff, period - diff)


def path_energy(history: FlowHistory, start, end) -> PathEnergy:
    """Discrete upper estimate of the least path energy between two spacetime points.

    ``start`` and ``end`` are ``(sample_index, time)`` pairs with times equal
    to stored frame times. Nodes are (sample, frame); an edge between
    consecutive frames costs ``dist^2 / dt`` with the intrinsic distance
    measured in the earlier frame's metric, matching samples by material
    label. Rotational frames only admit meridian paths.
    """
    (p1, t1), (p2, t2) = start, end
    if not t1 < t2:
        raise InvalidInput("path energy needs t1 < t2")
    k1, k2 = history.index_of(t1), history.index_of(t2)
    f1, f2 = history[k1], history[k2]
    if not (0 <= p1 < f1.n and 0 <= p2 < f2.n):
        raise InvalidInput("endpoint index outside the stored frame")
    cost = np.full(f1.n, np.inf)
    cost[p1] = 0.0
    back = []
    for k in range(k1, k2):
        fa, fb = history[k], history[k + 1]
        dt = fb.t - fa.t
        sa = np.asarray(fa.s)
        sb, period = _arclength_of_label(fa, fb.label)
        edge = _distance(sa[:, None], sb[None, :], period) ** 2 / dt
        total = cost[:, None] + edge
        arg = np.argmin(total, axis=0)
        cost = total[arg, np.arange(fb.n)]
        back.append(arg)
    value = float(cost[p2])
    path = [p2]
    j = p2
    for arg in reversed(back):
        j = int(arg[j])
        path.append(j)
    path.reverse()
    times = tuple(float(history[k].t) for k in range(k1, k2 + 1))
    return PathEnergy(value=value, path=tuple(int(i) for i in path), times=times)


@dataclass(frozen=True)
class PairCheck:
    start: tuple
    end: tuple
    lhs: float
    rhs: float
    margin: float
    delta_hat: float
    passed: bool


def integrated_rhs(t1, t2, eps0, d, delta_hat, phi2):
    """Lower bound for H(p2, t2) / H(p1, t1) given a path energy."""
    a = 1.0 + eps0 * d
    return (t1 / t2) ** (a * a / 2.0) * math.exp(
        -a / 4.0 * delta_hat - eps0 * (1.0 + (3.0 + 3.0 * eps0 * d) / 4.0) * phi2**2 * (t2 - t1)
    )


def integrated_bound_check(history: FlowHistory, pairs, eps0: float = 0.0, tol: float = 1e-3) -> list[PairCheck]:
    """Check the integrated Harnack estimate on spacetime point pairs.

    Using the discrete path energy (an upper estimate of the true infimum)
    makes the checked inequality a consequence of the exact one.
    """
    out = []
    for start, end in pairs:
        (p1, t1), (p2, t2) = start, end
        if not 0 < t1 < t2:
            raise InvalidInput("integrated bound needs 0 < t1 < t2")
        k1, k2 = history.index_of(t1), history.index_of(t2)
        H1, H2 = float(history[k1].H[p1]), float(history[k2].H[p2])
        if H1 <= 0 or H2 <= 0:
            raise HypothesisViolated("nonpositive H at a pair endpoint")
        pe = path_energy(history, start, end)
        lhs = H2 / H1
        rhs = integrated_rhs(history[k1].t, history[k2].t, eps0, history[k1].d, pe.value, float(history.phi[k2]))
        margin = lhs - rhs
        out.append(PairCheck(tuple(start), tuple(end), lhs, rhs, margin, pe.value, bool(margin >= -tol)))
    return out
