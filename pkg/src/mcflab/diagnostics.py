"""Pinching, diameter, roundness and rescaling diagnostics for flow histories."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import HypothesisViolated, InvalidInput
from .frame import FlowFrame, FlowHistory, frame_diameter


def _require_positive_H(frame: FlowFrame):
    if np.any(frame.H <= 0):
        raise HypothesisViolated(f"nonpositive H at t = {frame.t}")


def _check_k(frame: FlowFrame, k: int):
    if not 1 <= k <= max(frame.d - 1, 1):
        raise InvalidInput(f"k must lie in 1..{max(frame.d - 1, 1)}")


def q_field(frame: FlowFrame, k: int) -> np.ndarray:
    """Pointwise ratio ``(lam_1 + ... + lam_k) / H``."""
    _require_positive_H(frame)
    return np.sum(frame.lam[:, :k], axis=1) / frame.H


def pinching_ratios(frame: FlowFrame, k: int) -> tuple[float, int]:
    """Minimum of Q_k over the samples and its (lowest) index."""
    _check_k(frame, k)
    q = q_field(frame, k)
    i = int(np.argmin(q))  # argmin returns the first occurrence
    return float(q[i]), i


@dataclass(frozen=True)
class PinchingReport:
    k: int
    times: np.ndarray
    minima: np.ndarray
    inf: float
    violations: list  # (frame index, next frame index, drop)
    tol: float

    @property
    def passed(self) -> bool:
        return not self.violations


def pinching_monotonicity(history: FlowHistory, k: int, tol: float = 1e-4, budget: float = 0.0) -> PinchingReport:
    """Flag consecutive frames where min Q_k drops by more than ``tol + budget``.

    ``budget`` is the caller's discretisation allowance; it is added to the
    fixed tolerance.
    """
    minima = np.array([pinching_ratios(f, k)[0] for f in history])
    drops = minima[:-1] - minima[1:]
    allowed = tol + budget
    violations = [(int(i), int(i + 1), float(drops[i])) for i in np.nonzero(drops > allowed)[0]]
    return PinchingReport(k, history.times.copy(), minima, float(minima.min()), violations, allowed)


def inequality_chain_holds(frame: FlowFrame, k: int, slack: float = 1e-12) -> bool:
    """Check ``min Q_{d-1} >= ((d-1)/k) min Q_k`` whenever ``min Q_k <= 0``."""
    d = frame.d
    qk = pinching_ratios(frame, k)[0]
    if qk > 0 or d < 2:
        return True
    qd = pinching_ratios(frame, d - 1)[0]
    return qd >= (d - 1) / k * qk - slack


def diameter(frame: FlowFrame) -> float:
    """Extrinsic diameter of a closed frame."""
    return frame_diameter(frame)


@dataclass(frozen=True)
class DiameterReport:
    times: np.ndarray
    diam: np.ndarray
    rate_margins: np.ndarray  # (-4d) - d(diam^2)/dt per interval
    worst_margin: float
    worst_interval: int
    nonincreasing: bool
    rate_law: bool

    @property
    def passed(self) -> bool:
        return self.nonincreasing and self.rate_law


def diameter_decay_check(history: FlowHistory, tol_rel: float = 1e-3, mono_rel: float = 1e-6) -> DiameterReport:
    """Check that diam is nonincreasing and that diam^2 drops at rate at least 4d.

    The rate law is checked as ``diam^2(t_{k+1}) - diam^2(t_k) <= -4 d dt + tol``
    with ``tol = tol_rel * diam^2(t_k)``.
    """
    if len(history) < 2:
        raise InvalidInput("diameter decay needs at least two frames")
    d = history[0].d
    diam = np.array([diameter(f) for f in history])
    times = history.times
    dt = np.diff(times)
    D2 = diam**2
    dD2 = np.diff(D2)
    margins = (-4.0 * d) - dD2 / dt
    mono = bool(np.all(np.diff(diam) <= mono_rel * diam[:-1]))
    rate = bool(np.all(dD2 <= -4.0 * d * dt + tol_rel * D2[:-1]))
    w = int(np.argmin(margins))
    return DiameterReport(times.copy(), diam, margins, float(margins[w]), w, mono, rate)


@dataclass(frozen=True)
class ConditionReport:
    times: np.ndarray
    minQ1: np.ndarray
    maxH_diam: np.ndarray
    maxH_over_minH: np.ndarray
    sqrt_neg_t_maxH: np.ndarray
    phi_diam: np.ndarray
    diameter_supported: bool
    window: dict  # column -> {"mean": ..., "slope": ...}

    def columns(self) -> dict:
        return {
            "minQ1": self.minQ1,
            "maxH*diam": self.maxH_diam,
            "maxH/minH": self.maxH_over_minH,
            "sqrt(-t)*maxH": self.sqrt_neg_t_maxH,
            "phi*diam": self.phi_diam,
        }


def _window_trend(t, y, fraction):
    m = max(2, int(math.ceil(fraction * len(t))))
    tw, yw = t[-m:], y[-m:]
    ok = np.isfinite(yw)
    if ok.sum() == 0:
        return {"mean": math.nan, "slope": math.nan}
    mean = float(np.mean(yw[ok]))
    slope = float(np.polyfit(tw[ok], yw[ok], 1)[0]) if ok.sum() >= 2 else math.nan
    return {"mean": mean, "slope": slope}


def sphere_conditions(history: FlowHistory, window: float = 0.25) -> ConditionReport:
    """Time series of the roundness conditions plus windowed trend summaries.

    ``sqrt(-t) maxH`` is only defined on negative times and is NaN elsewhere.
    Diameters of open frames are NaN and the report is flagged.
    """
    for f in history:
        _require_positive_H(f)
    t = history.times
    maxH = history.maxH
    minH = np.array([f.minH for f in history])
    minQ1 = np.array([pinching_ratios(f, 1)[0] for f in history])
    supported = all(f.closed for f in history)
    diam = np.array([diameter(f) if f.closed else math.nan for f in history])
    with np.errstate(invalid="ignore"):
        sq = np.where(t < 0, np.sqrt(np.abs(t)) * maxH, math.nan)
    report = ConditionReport(
        times=t.copy(), minQ1=minQ1, maxH_diam=maxH * diam, maxH_over_minH=maxH / minH,
        sqrt_neg_t_maxH=sq, phi_diam=history.phi * diam, diameter_supported=supported, window={},
    )
    trends = {name: _window_trend(t, col, window) for name, col in report.columns().items()}
    report.window.update(trends)
    return report


def umbilicity_residual(frame: FlowFrame) -> float:
    """Largest trace-free curvature norm relative to H."""
    _require_positive_H(frame)
    mean = frame.H / frame.d
    tf = np.sqrt(np.sum((frame.lam - mean[:, None]) ** 2, axis=1))
    return float(np.max(tf / frame.H))


def flatness_profile(history: FlowHistory, k: int, eps_grid) -> dict:
    """For each eps, the largest delta with ``H/phi < delta  =>  Q_k > -eps`` on all samples.

    Returns a mapping ``eps -> delta``; delta is 1 when no sample offends.
    """
    ratios, qs = [], []
    for f, ph in zip(history, history.phi):
        ratios.append(f.H / ph)
        qs.append(q_field(f, k))
    ratio = np.concatenate(ratios)
    q = np.concatenate(qs)
    out = {}
    for eps in eps_grid:
        bad = q <= -eps
        out[float(eps)] = float(min(1.0, ratio[bad].min())) if bad.any() else 1.0
    return out


def rescale(history: FlowHistory, times, selector="argmin", k: int = 1) -> list[FlowFrame]:
    """Blow-up rescalings ``phi(t_j) (X - X(p_j))`` of stored frames, placed at time 0.

    ``selector`` is ``"argmin"`` (point of least Q_k) or an explicit sample index.
    """
    out = []
    for tj in times:
        j = history.index_of(tj)
        frame = history[j]
        phi = float(history.phi[j])
        if not phi > 0:
            raise InvalidInput("rescaling needs a positive curvature envelope")
        if selector == "argmin":
            p = pinching_ratios(frame, k)[1]
        elif isinstance(selector, (int, np.integer)) and not isinstance(selector, bool):
            p = int(selector)
            if not 0 <= p < frame.n:
                raise InvalidInput(f"selector {p} outside 0..{frame.n - 1}")
        else:
            raise InvalidInput("selector must be 'argmin' or a sample index")
        base = frame.positions[p]
        P = phi * np.asarray(frame.profile)
        if frame.rep == "curve":
            new = _rebuild(frame, P - phi * base[:2], origin=None, phi=phi)
        else:
            origin = phi * base
            if frame.origin is not None:
                origin = origin + phi * np.asarray(frame.origin)
            new = _rebuild(frame, P, origin=origin, phi=phi)
        if new.maxH > 1.0 + 1e-9:
            raise AssertionError(f"rescaled maxH = {new.maxH} exceeds 1")
        out.append(new)
    return out


def _rebuild(frame, P, origin, phi):
    """Scaled copy of ``frame``; curvature fields scale exactly, without re-differentiation."""
    inv = 1.0 / phi
    return frame.replace_fields(
        t=0.0, profile=np.array(P), lam=frame.lam * inv, H=frame.H * inv, A2=frame.A2 * inv**2,
        gradH=frame.gradH * inv**2, lapH=frame.lapH * inv**3, weight=frame.weight * phi**frame.d,
        s=frame.s * phi, origin=None if origin is None else np.array(origin, dtype=float),
    )
