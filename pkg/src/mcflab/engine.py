"""Explicit mean curvature flow of curve and rotational frames.

Positions are advanced by classical RK4 on ``X -> H n``; there is no
tangential motion, mesh quality is restored by periodic arclength
resampling. The step size follows a curvature rule ``cfl / max|A|^2`` capped
by a parabolic grid rule ``cfl * h_min^2 / (d + 1)``; the explicit scheme is
unstable without the second term.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import BlowUpDetected, InvalidInput, MCFLabError, NumericalFailure
from .frame import FlowFrame, FlowHistory, curvature_vector, frame_from_profile, resample_arclength

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EngineControls:
    cfl: float = 0.4
    resample_every: int = 50
    snapshot_every: int = 20
    max_steps: int = 200_000
    blowup_factor: float = 1e4

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise InvalidInput("cfl out of (0,1]")
        if self.resample_every < 0 or self.snapshot_every < 1 or self.max_steps < 1:
            raise InvalidInput("resample_every >= 0, snapshot_every >= 1 and max_steps >= 1 are required")
        if not self.blowup_factor > 1:
            raise InvalidInput("blowup_factor must exceed 1")


def stable_dt(frame: FlowFrame, cfl: float) -> float:
    """Adaptive step: curvature rule capped by the explicit parabolic limit."""
    curv = 1.0 / frame.max_A2 if frame.max_A2 > 0 else np.inf
    grid = frame.h_min**2 / (frame.d + 1)
    return cfl * min(curv, grid)


def _velocity(P, frame):
    v = curvature_vector(P, frame.rep, frame.d, frame.ends)
    if not np.all(np.isfinite(v)):
        raise NumericalFailure(f"non-finite curvature vector at t = {frame.t}")
    return v


def step(frame: FlowFrame, dt: float, cfl: float = 1.0, cap: float | None = None) -> FlowFrame:
    """Advance ``frame`` by one RK4 step of length ``dt``.

    Parameters
    ----------
    cfl : float
        Precondition check ``dt <= cfl / max|A|^2``.
    cap : float, optional
        Largest admissible ``max|A|``; exceeding it raises BlowUpDetected
        with the new frame attached.
    """
    if not dt > 0:
        raise InvalidInput("dt must be positive")
    if frame.max_A2 > 0 and dt > cfl / frame.max_A2 * (1 + 1e-12):
        raise InvalidInput(f"dt = {dt:.3e} violates the curvature CFL bound {cfl / frame.max_A2:.3e}")
    P = np.asarray(frame.profile)
    k1 = _velocity(P, frame)
    k2 = _velocity(P + 0.5 * dt * k1, frame)
    k3 = _velocity(P + 0.5 * dt * k2, frame)
    k4 = _velocity(P + dt * k3, frame)
    Q = P + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if frame.rep == "rot":
        # keep pole samples exactly on the axis
        if frame.poles[0]:
            Q[0, 1] = 0.0
        if frame.poles[1]:
            Q[-1, 1] = 0.0
        if np.any(Q[1:-1, 1] <= 0) or np.any(Q[:, 1] < 0):
            raise NumericalFailure(f"profile crossed the axis near t = {frame.t + dt}")
    if not np.all(np.isfinite(Q)):
        raise NumericalFailure(f"non-finite positions at t = {frame.t + dt}")
    try:
        new = frame_from_profile(frame, Q, frame.t + dt)
    except NumericalFailure:
        raise
    except MCFLabError as exc:
        raise NumericalFailure(f"frame rebuild failed at t = {frame.t + dt}: {exc}") from exc
    if cap is not None and np.sqrt(new.max_A2) > cap:
        raise BlowUpDetected(f"max|A| = {np.sqrt(new.max_A2):.4g} exceeds cap {cap:.4g}", frame=new)
    return new


def run_flow(initial: FlowFrame, t_end: float, controls: EngineControls | None = None) -> FlowHistory:
    """Evolve ``initial`` to ``t_end`` and record snapshots.

    The returned history's ``reason`` is ``"complete"``, ``"max-steps"`` or
    ``"blow-up"``. Numerical failures raise NumericalFailure carrying the
    partial history.
    """
    controls = controls or EngineControls()
    if not t_end > initial.t:
        raise InvalidInput("t_end must exceed the initial time")
    cap = controls.blowup_factor * np.sqrt(initial.max_A2)
    frames = [initial]
    frame = initial
    steps = 0
    reason = "complete"
    t_tol = 1e-13 * max(1.0, abs(t_end))
    while frame.t < t_end - t_tol:
        if steps >= controls.max_steps:
            reason = "max-steps"
            break
        dt = min(stable_dt(frame, controls.cfl), t_end - frame.t)
        if not frame.t + dt > frame.t:
            partial = FlowHistory(tuple(frames), reason="numerical-failure", steps=steps)
            raise NumericalFailure(f"time step {dt:.3e} underflows at t = {frame.t}", history=partial)
        try:
            frame = step(frame, dt, cfl=1.0, cap=cap)
        except BlowUpDetected as exc:
            frame = exc.frame
            reason = "blow-up"
            steps += 1
            log.info("run stopped by blow-up cap at t = %.6g", frame.t)
            break
        except NumericalFailure as exc:
            partial = FlowHistory(tuple(frames), reason="numerical-failure", steps=steps)
            raise NumericalFailure(str(exc), history=partial) from exc
        steps += 1
        if controls.resample_every and steps % controls.resample_every == 0:
            try:
                frame = resample_arclength(frame, frame.n)
            except MCFLabError as exc:
                partial = FlowHistory(tuple(frames), reason="numerical-failure", steps=steps)
                raise NumericalFailure(f"resampling failed at t = {frame.t}: {exc}", history=partial) from exc
        if steps % controls.snapshot_every == 0:
            frames.append(frame)
    if frames[-1] is not frame:
        frames.append(frame)
    log.debug("run finished: %s after %d steps at t = %.6g", reason, steps, frame.t)
    return FlowHistory(tuple(frames), reason=reason, steps=steps)
