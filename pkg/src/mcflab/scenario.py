"""Scenario orchestration: build a history, run the checks, write reports."""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as diag
from . import harnack as hk
from . import oracles
from .config import ORACLE_GEOMETRIES, ConfigError, ScenarioConfig
from .engine import EngineControls, run_flow
from .errors import HypothesisViolated, InvalidInput, NumericalFailure
from .frame import FlowHistory, frame_from_profile
from .shapes import perturbed_circle_frame, perturbed_sphere_frame
from .snapshot import fmt, read_profile, write_snapshot

log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_BREACH = 0, 1, 2, 3

_DEFAULT_TRUNCATION = {"cylinder": 5.0, "grim-reaper": 1.2, "bowl": 2.0}
_DEFAULT_RESOLUTION = {"sphere": 129, "cylinder": 129, "grim-reaper": 513, "bowl": 129, "paperclip": 256}
Q_DROP = 0.05


@dataclass
class Outcome:
    history: FlowHistory | None
    status: str
    checks: list = field(default_factory=list)
    info: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    columns: list = field(default_factory=list)
    extra_frames: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        if self.status == "numerical-failure":
            return EXIT_NUMERICAL
        if any(c["passed"] is False for c in self.checks):
            return EXIT_BREACH
        return EXIT_OK


# --------------------------------------------------------------------------
# history construction
# --------------------------------------------------------------------------

def oracle_spec(cfg: ScenarioConfig) -> oracles.OracleSpec:
    kind = cfg.geometry
    if kind in ("grim-reaper", "paperclip") and cfg.d != 1:
        raise ConfigError(f"{kind} is a plane curve; set d = 1")
    return oracles.OracleSpec(
        kind=kind,
        d=cfg.d,
        scale=cfg.r0,
        truncation=cfg.truncation if cfg.truncation is not None else _DEFAULT_TRUNCATION.get(kind),
        resolution=cfg.resolution or _DEFAULT_RESOLUTION[kind],
        ancient=cfg.ancient,
    )


def initial_frame(cfg: ScenarioConfig):
    t0 = cfg.start_time
    if cfg.geometry in ORACLE_GEOMETRIES:
        return oracles.oracle_frame(oracle_spec(cfg), t0, analytic=False)
    if cfg.geometry == "perturbed":
        if cfg.d == 1:
            base = perturbed_circle_frame(cfg.amplitude, n=cfg.resolution or 128)
        else:
            base = perturbed_sphere_frame(cfg.d, cfg.amplitude, n=cfg.resolution or 81)
        return frame_from_profile(base, cfg.r0 * np.asarray(base.profile), t0)
    base = read_profile(cfg.profile, cfg.d)
    if base.d != cfg.d:
        raise ConfigError(f"profile file has d = {base.d}, config has d = {cfg.d}")
    return frame_from_profile(base, np.asarray(base.profile), t0)


def build_history(cfg: ScenarioConfig) -> tuple[FlowHistory | None, str]:
    if cfg.data_source in ("analytic", "discrete"):
        times = np.linspace(cfg.start_time, cfg.t_end, cfg.frames)
        hist = oracles.oracle_history(oracle_spec(cfg), times, analytic=cfg.data_source == "analytic")
        return hist, "oracle"
    e = cfg.engine
    controls = EngineControls(e.cfl, e.resample_every, e.snapshot_every, e.max_steps, e.blowup_factor)
    try:
        hist = run_flow(initial_frame(cfg), cfg.t_end, controls)
    except NumericalFailure as exc:
        log.error("numerical failure: %s", exc)
        return exc.history, "numerical-failure"
    return hist, hist.reason


def inject_q_drop(history: FlowHistory, k: int) -> FlowHistory:
    """Test fixture: lower lam_1 by Q_DROP * H on frame ``k`` (H unchanged)."""
    if not 1 <= k < len(history):
        raise ConfigError(f"checks.inject_q_drop = {k} must index a frame in 1..{len(history) - 1}")
    f = history[k]
    if f.d < 2:
        raise ConfigError("the Q-drop fixture needs d >= 2")
    lam = np.array(f.lam)
    lam[:, 0] -= Q_DROP * f.H
    lam[:, -1] += Q_DROP * f.H
    frames = list(history.frames)
    frames[k] = f.replace_fields(lam=lam, A2=(lam**2).sum(axis=1))
    return FlowHistory(tuple(frames), reason=history.reason, steps=history.steps)


# --------------------------------------------------------------------------
# checks
# --------------------------------------------------------------------------

def _check(name, passed, margin=None, location=None, **detail):
    out = {"name": name, "passed": passed, "worst_margin": margin, "location": location or {}}
    out.update(detail)
    return out


def _mode(cfg):
    return "ancient" if cfg.ancient else "finite-time"


def check_oracle_residual(cfg, history):
    spec = oracle_spec(cfg)
    tol = cfg.tol("oracle_tol")
    probe = 1e-4
    worst, where = 0.0, None
    for f in history:
        try:
            r = oracles.oracle_residual(spec, f.t, probe)
        except InvalidInput:
            continue  # probe window leaves the solution's lifespan
        if r >= worst:
            worst, where = r, f.t
    if where is None:
        return _check("oracle-residual", None, detail="no time admits the residual probe")
    return _check("oracle-residual", worst <= tol, tol - worst, {"t": where}, residual=worst, tol=tol)


def check_harnack(cfg, history):
    mode = _mode(cfg)
    try:
        sweep = hk.harnack_sweep(history, mode, cfg.eps0_policy, tol_scale=cfg.tol("harnack_tol"))
    except HypothesisViolated as exc:
        return _check("harnack-sweep", False, detail=str(exc)), None
    live = [r for r in sweep if not r.skipped]
    if not live:
        return _check("harnack-sweep", None, detail="no frame in the admissible time range"), sweep
    margins = [(r.z_min + r.tol) / r.phi**3 for r in live]
    w = int(np.argmin(margins))
    worst = live[w]
    return _check(
        "harnack-sweep", all(r.passed for r in live), margins[w],
        {"t": worst.t, "index": worst.index}, z_min=worst.z_min, frames=len(live),
    ), sweep


def _random_pairs(history, count, seed):
    idx = [k for k in range(len(history)) if history[k].t > 0]
    if len(idx) < 2:
        return []
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(count):
        a, b = sorted(rng.choice(len(idx), size=2, replace=False))
        k1, k2 = idx[a], idx[b]
        p1 = int(rng.integers(history[k1].n))
        p2 = int(rng.integers(history[k2].n))
        pairs.append(((p1, history[k1].t), (p2, history[k2].t)))
    return pairs


def check_integrated(cfg, history):
    if cfg.ancient:
        return _check("integrated-bound", None, detail="needs positive times")
    pairs = _random_pairs(history, cfg.checks.pairs, cfg.seed)
    if not pairs:
        return _check("integrated-bound", None, detail="fewer than two frames with t > 0")
    eps0 = cfg.eps0_policy
    try:
        if eps0 == "auto":
            eps0 = hk.epsilon0_required(history)
        res = hk.integrated_bound_check(history, pairs, eps0, tol=cfg.tol("integrated_tol"))
    except HypothesisViolated as exc:
        return _check("integrated-bound", False, detail=str(exc))
    w = min(range(len(res)), key=lambda i: res[i].margin)
    r = res[w]
    return _check(
        "integrated-bound", all(x.passed for x in res), r.margin,
        {"start": list(r.start), "end": list(r.end)}, pairs=len(res), eps0=eps0,
    )


def check_pinching(cfg, history):
    d = history[0].d
    ks = sorted({1, max(d - 1, 1)})
    out = []
    for k in ks:
        try:
            rep = diag.pinching_monotonicity(history, k, cfg.tol("pinching_tol"), cfg.checks.pinching_budget)
        except HypothesisViolated as exc:
            out.append(_check(f"pinching-monotonicity-k{k}", False, detail=str(exc)))
            continue
        drops = rep.minima[:-1] - rep.minima[1:]
        if len(drops):
            w = int(np.argmax(drops))
            margin = rep.tol - float(drops[w])
            loc = {"frames": [w, w + 1], "t": [float(rep.times[w]), float(rep.times[w + 1])]}
        else:
            margin, loc = None, {}
        out.append(_check(
            f"pinching-monotonicity-k{k}", rep.passed, margin, loc,
            violations=[{"frames": [a, b], "drop": dr} for a, b, dr in rep.violations],
        ))
    return out


def check_diameter(cfg, history):
    if not all(f.closed for f in history):
        return _check("diameter-decay", None, detail="unsupported: open frames have no diameter")
    if len(history) < 2:
        return _check("diameter-decay", None, detail="needs two frames")
    rep = diag.diameter_decay_check(history, tol_rel=cfg.tol("diameter_tol"))
    w = rep.worst_interval
    return _check(
        "diameter-decay", rep.passed, rep.worst_margin,
        {"t": [float(rep.times[w]), float(rep.times[w + 1])]}, nonincreasing=rep.nonincreasing, rate_law=rep.rate_law,
    )


def check_rescale(cfg, history, outcome):
    count = min(cfg.checks.rescale_count, len(history))
    ks = sorted({int(round(v)) for v in np.linspace(0, len(history) - 1, count)})
    times = [history[k].t for k in ks]
    frames = diag.rescale(history, times, "argmin")
    resid = [diag.umbilicity_residual(f) for f in frames]
    outcome.extra_frames["rescaled"] = frames
    outcome.info["umbilicity"] = {"t": times, "residual": resid}
    slack = 1e-9 * cfg.checks.tol_scale
    passed = resid[-1] <= resid[0] + slack
    ratio = resid[0] / resid[-1] if resid[-1] > 0 else math.inf
    return _check("umbilicity-decay", passed, resid[0] + slack - resid[-1], {"t": [times[0], times[-1]]}, ratio=ratio)


def conditions_info(history):
    try:
        rep = diag.sphere_conditions(history)
    except HypothesisViolated as exc:
        return {"error": str(exc)}
    return {"diameter_supported": rep.diameter_supported, "window": rep.window}


def flatness_info(history):
    k = max(history[0].d - 1, 1)
    try:
        prof = diag.flatness_profile(history, k, (0.01, 0.05, 0.1))
    except HypothesisViolated as exc:
        return {"error": str(exc)}
    return {"k": k, "delta": {fmt(e): v for e, v in prof.items()}}


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

def report_rows(cfg, history, sweep=None):
    d = history[0].d
    qcols = [f"minQ_{k}" for k in range(1, d)]
    columns = ["t", "maxH", "minH", "diam", *qcols, "minZ", "phi"]
    if sweep is None:
        try:
            sweep = hk.harnack_sweep(history, _mode(cfg), cfg.eps0_policy)
        except (HypothesisViolated, InvalidInput):
            sweep = None
    rows = []
    for k, f in enumerate(history):
        diam = f.diameter if f.closed else math.nan
        positive = bool(np.all(f.H > 0))
        qs = [diag.pinching_ratios(f, j)[0] if positive else math.nan for j in range(1, d)]
        z = math.nan
        if sweep is not None and not sweep[k].skipped:
            z = sweep[k].z_min
        rows.append([f.t, f.maxH, f.minH, diam, *qs, z, float(history.phi[k])])
    return columns, rows


def _json_clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, (np.floating, np.integer)):
        return _json_clean(obj.item())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_json_clean(v) for v in obj]
    return obj


def write_outputs(cfg, outcome: Outcome, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    if outcome.columns:
        if cfg.output.format == "csv":
            with open(os.path.join(out_dir, "report.csv"), "w", encoding="utf-8", newline="\n") as fh:
                fh.write(",".join(outcome.columns) + "\n")
                for row in outcome.rows:
                    fh.write(",".join(fmt(v) for v in row) + "\n")
        else:
            data = [dict(zip(outcome.columns, row)) for row in outcome.rows]
            with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8", newline="\n") as fh:
                json.dump(_json_clean(data), fh, indent=1)
                fh.write("\n")
    if cfg.output.snapshots and outcome.history is not None:
        snap_dir = os.path.join(out_dir, "snapshots")
        os.makedirs(snap_dir, exist_ok=True)
        for k, f in enumerate(outcome.history):
            write_snapshot(f, os.path.join(snap_dir, f"frame_{k:05d}.txt"))
        for group, frames in outcome.extra_frames.items():
            sub = os.path.join(out_dir, group)
            os.makedirs(sub, exist_ok=True)
            for k, f in enumerate(frames):
                write_snapshot(f, os.path.join(sub, f"frame_{k:05d}.txt"))
    verdict = {
        "scenario": cfg.scenario,
        "geometry": cfg.geometry,
        "d": cfg.d,
        "source": cfg.data_source,
        "seed": cfg.seed,
        "status": outcome.status,
        "exit_code": outcome.exit_code,
        "frames": 0 if outcome.history is None else len(outcome.history),
        "checks": outcome.checks,
        "info": outcome.info,
    }
    with open(os.path.join(out_dir, "verdict.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_json_clean(verdict), fh, indent=1)
        fh.write("\n")


def evaluate(cfg: ScenarioConfig) -> Outcome:
    """Build the scenario's history and run the checks it asks for."""
    if cfg.scenario == "oracle" and cfg.data_source == "engine":
        raise ConfigError("the oracle scenario evaluates exact solutions; use source = analytic or discrete")
    history, status = build_history(cfg)
    outcome = Outcome(history, status)
    if history is None:
        return outcome
    if cfg.checks.inject_q_drop >= 0:
        history = inject_q_drop(history, cfg.checks.inject_q_drop)
        outcome.history = history
    sc, c = cfg.scenario, cfg.checks
    sweep = None
    if status != "numerical-failure":
        if sc in ("oracle", "full-suite") and cfg.data_source != "engine":
            outcome.checks.append(check_oracle_residual(cfg, history))
        if sc == "harnack" or (sc == "full-suite" and c.harnack):
            chk, sweep = check_harnack(cfg, history)
            outcome.checks.append(chk)
        if (sc == "harnack" or sc == "full-suite") and c.integrated:
            outcome.checks.append(check_integrated(cfg, history))
        if sc in ("diagnose", "full-suite"):
            if c.diameter:
                outcome.checks.append(check_diameter(cfg, history))
            if c.pinching:
                outcome.checks.extend(check_pinching(cfg, history))
            if c.conditions:
                outcome.info["conditions"] = conditions_info(history)
                outcome.info["flatness"] = flatness_info(history)
        if sc == "rescale":
            outcome.checks.append(check_rescale(cfg, history, outcome))
    outcome.columns, outcome.rows = report_rows(cfg, history, sweep)
    return outcome


def run_scenario(cfg: ScenarioConfig, out_dir: str) -> int:
    """Run ``cfg`` and write its reports into ``out_dir``; returns the exit code."""
    outcome = evaluate(cfg)
    write_outputs(cfg, outcome, out_dir)
    return outcome.exit_code
