"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line PASS/FAIL summary that pytest prints in its
terminal summary section.
"""

import math
import os

import numpy as np
import pytest

from mcflab import diagnostics as diag
from mcflab import harnack as hk
from mcflab import oracles
from mcflab.cli import main
from mcflab.engine import EngineControls, run_flow
from mcflab.frame import FlowHistory
from mcflab.harnack import HarnackParams
from mcflab.oracles import OracleSpec

from .test_harnack import a_priori_radius, random_admissible


def _sphere_z(H, t):
    return H**3 / 2 + H / (2 * t)


def test_criterion_01_harnack_positivity_on_sphere(sphere_run, verdict_line):
    h = sphere_run
    sweep = hk.harnack_sweep(h, "finite-time", "auto")
    live = [(r, f) for r, f in zip(sweep, h) if not r.skipped]
    positive = all(r.z_min >= 0 for r, _ in live)
    rel = max(abs(r.z_min - _sphere_z(2 / math.sqrt(1 - 4 * f.t), f.t)) / _sphere_z(2 / math.sqrt(1 - 4 * f.t), f.t)
              for r, f in live)
    f8 = oracles.sphere_frame(2, 1.0, t=0.125)
    z8 = hk.harnack_min(f8.point(0), HarnackParams(0.0, 2, f8.maxH, 0.125)).Z_min
    ok = positive and rel <= 1e-3 and abs(z8 - 22.6274) <= 1e-4 and 1800 <= h.steps <= 2200
    verdict_line(1, ok, f"min Z >= 0 on {len(live)} frames ({h.steps} steps), worst rel dev {rel:.2e}, Z(1/8) = {z8:.4f}")
    assert ok


def test_criterion_02_classical_reduction(verdict_line):
    rng = np.random.default_rng(2)
    ok = True
    for _ in range(20):
        pt, p = random_admissible(rng)
        p0 = HarnackParams(0.0, p.d, p.phi, p.t, p.mode)
        if np.any(pt.lam < 0):
            continue
        res = hk.harnack_min(pt, p0)
        ok &= p0.delta == 1.0 and res.terms["cubic"] == 0.0 and res.terms["envelope"] == 0.0
        ok &= res.terms["time-derivative"] == pt.lapH + pt.A_norm_sq * pt.H
    verdict_line(2, ok, "eps0 = 0 gives delta = 1 and zero cubic/envelope terms")
    assert ok


def test_criterion_03_translator_equality(verdict_line):
    exact = oracles.grim_reaper_frame(t=0.0, truncation=1.2, resolution=513, analytic=True)
    z_exact, _ = hk.zmin_field(exact, HarnackParams(0.0, 1, exact.maxH, -1.0, "ancient"))
    disc = oracles.grim_reaper_frame(t=0.0, truncation=1.2, resolution=512, analytic=False)
    z_disc, _ = hk.zmin_field(disc, HarnackParams(0.0, 1, disc.maxH, -1.0, "ancient"))
    e1 = float(np.max(np.abs(z_exact)))
    e2 = float(np.max(np.abs(z_disc[disc.interior_mask(0.1)])))
    ok = e1 <= 1e-8 and e2 <= 1e-4
    verdict_line(3, ok, f"grim reaper |Z_min| analytic {e1:.1e}, 512 samples (interior) {e2:.1e}")
    assert ok


def test_criterion_04_minimiser_oracles(verdict_line):
    rng = np.random.default_rng(4)
    worst_grid, worst_rand = -math.inf, -math.inf
    count = 0
    while count < 100:
        pt, p = random_admissible(rng)
        res = hk.harnack_min(pt, p)
        if res.regularized:
            continue
        count += 1
        grid = hk.harnack_min_bruteforce(pt, p, radius=a_priori_radius(pt, p), n_grid=41 if p.d == 3 else 101)
        bound = grid.grid_spacing**2 * float(np.max(pt.lam + p.eps0 * pt.H))
        worst_grid = max(worst_grid, abs(res.Z_min - grid.Z_min) - bound)
        V = rng.normal(0.0, 3.0, (1000, p.d))
        zs = min(hk.harnack_quantity(pt, v, p) for v in V)
        worst_rand = max(worst_rand, hk.harnack_quantity(pt, res.V_star, p) - zs - 1e-12 * (1 + abs(zs)))
    ok = worst_grid <= 0 and worst_rand <= 0
    verdict_line(4, ok, f"100 points: grid excess {worst_grid:.2e} (<= 0), random-direction excess {worst_rand:.2e} (<= 0)")
    assert ok


def test_criterion_05_integrated_bound(perturbed_run, verdict_line):
    spec = OracleSpec("sphere", 2, resolution=65)
    sph = oracles.oracle_history(spec, np.linspace(0.125, 0.1875, 21))
    (res,) = hk.integrated_bound_check(sph, [((10, 0.125), (10, 0.1875))], eps0=0.0)
    closed_form = abs(res.lhs - 1.41421) <= 5e-6 and abs(res.rhs - 0.81650) <= 5e-6 and res.passed
    h = perturbed_run
    rng = np.random.default_rng(5)
    pos = [k for k in range(len(h)) if h[k].t > 0]
    pairs = []
    for _ in range(50):
        a, b = sorted(rng.choice(len(pos), 2, replace=False))
        pairs.append(((int(rng.integers(h[pos[a]].n)), h[pos[a]].t), (int(rng.integers(h[pos[b]].n)), h[pos[b]].t)))
    checks = hk.integrated_bound_check(h, pairs, hk.epsilon0_required(h))
    worst = min(c.margin for c in checks)
    ok = closed_form and worst >= -1e-3
    verdict_line(5, ok, f"sphere LHS {res.lhs:.5f} >= RHS {res.rhs:.5f}; perturbed run worst margin over 50 pairs {worst:.3e}")
    assert ok


@pytest.fixture(scope="module")
def sphere3_run():
    return run_flow(oracles.sphere_frame(3, 1.0, resolution=81, analytic=False), 0.15)


@pytest.fixture(scope="module")
def cylinder3_run():
    spec = OracleSpec("cylinder", d=3, truncation=3.0, resolution=61)
    return run_flow(oracles.oracle_frame(spec, 0.0, analytic=False), 0.2)


def test_criterion_06_pinching_monotonicity(sphere_run, sphere3_run, cylinder_run, cylinder3_run, perturbed_run,
                                            verdict_line):
    runs = {"sphere d=2": sphere_run, "sphere d=3": sphere3_run, "cylinder d=2": cylinder_run,
            "cylinder d=3": cylinder3_run, "perturbed sphere": perturbed_run}
    counts = {}
    for name, h in runs.items():
        d = h[0].d
        counts[name] = sum(len(diag.pinching_monotonicity(h, k).violations) for k in sorted({1, d - 1}))
    frames = list(sphere_run.frames)
    f = frames[10]
    lam = np.array(f.lam)
    lam[:, 0] -= 0.05 * f.H
    lam[:, 1] += 0.05 * f.H
    frames[10] = f.replace_fields(lam=lam)
    flagged = [(a, b) for a, b, _ in diag.pinching_monotonicity(FlowHistory(tuple(frames)), 1).violations]
    ok = all(c == 0 for c in counts.values()) and flagged == [(9, 10)]
    verdict_line(6, ok, f"violations {counts}; injected fixture flagged {flagged}")
    assert ok


def test_criterion_07_diameter_law(sphere_run, sphere3_run, perturbed_run, verdict_line):
    circle = run_flow(oracles.sphere_frame(1, 1.0, resolution=128, analytic=False), 0.2)
    reports = {name: diag.diameter_decay_check(h) for name, h in
               {"circle": circle, "sphere d=2": sphere_run, "sphere d=3": sphere3_run, "perturbed": perturbed_run}.items()}
    all_pass = all(r.rate_law for r in reports.values())
    m2 = reports["sphere d=2"].worst_margin
    m3 = reports["sphere d=3"].worst_margin
    ok = all_pass and abs(m2 - 8) <= 0.08 and abs(m3 - 12) <= 0.12
    margins = ", ".join(f"{k} {r.worst_margin:.4f}" for k, r in reports.items())
    verdict_line(7, ok, f"rate law holds on all closed runs; worst margins: {margins}")
    assert ok


def test_criterion_08_sphere_conditions(perturbed_run, verdict_line):
    # ancient convention: extinction at t = 0, radius 2 at t = -1
    initial = oracles.sphere_frame(2, 1.0, t=-1.0, ancient=True, resolution=81, analytic=False)
    h = run_flow(initial, -0.05)
    rep = diag.sphere_conditions(h)
    e_diam = float(np.max(np.abs(rep.maxH_diam - 4.0)))
    e_sqrt = abs(rep.window["sqrt(-t)*maxH"]["mean"] - 1.0)
    e_ratio = float(np.max(np.abs(rep.maxH_over_minH - 1.0)))
    p = perturbed_run
    idx = np.linspace(0, len(p) - 1, 6).astype(int)
    resid = [diag.umbilicity_residual(f) for f in diag.rescale(p, p.times[idx])]
    decay = resid[0] / resid[-1]
    ok = e_diam <= 1e-3 and e_sqrt <= 1e-3 and e_ratio <= 1e-6 and decay >= 10
    verdict_line(8, ok, f"|maxH*diam-4| {e_diam:.1e}, |sqrt(-t)maxH-1| {e_sqrt:.1e}, |maxH/minH-1| {e_ratio:.1e}, "
                        f"rescaled umbilicity decay {decay:.3g}x")
    assert ok


def _time_stepping_ratio(frame, t_end):
    ctl = dict(snapshot_every=100_000, resample_every=0)

    def radius(cfl):
        f = run_flow(frame, t_end, EngineControls(cfl=cfl, **ctl))[-1]
        return float(np.max(np.linalg.norm(f.profile, axis=1)))

    ref = radius(0.025)
    return abs(radius(0.8) - ref) / abs(radius(0.4) - ref)


SHIPPED = [
    (OracleSpec("sphere", d=1), 0.05), (OracleSpec("sphere", d=2), 0.05), (OracleSpec("sphere", d=3), 0.05),
    (OracleSpec("sphere", d=2, ancient=True), -1.0), (OracleSpec("cylinder", d=2, truncation=3.0), 0.05),
    (OracleSpec("cylinder", d=3, truncation=3.0), 0.05), (OracleSpec("grim-reaper", d=1, truncation=1.2), 0.0),
    (OracleSpec("bowl", d=2, truncation=2.0), 0.0), (OracleSpec("bowl", d=3, truncation=2.0), 0.0),
    (OracleSpec("paperclip", d=1), -1.0),
]


def test_criterion_09_engine_convergence(verdict_line):
    circle = _time_stepping_ratio(oracles.sphere_frame(1, 1.0, resolution=64, analytic=False), 0.3)
    sphere = _time_stepping_ratio(oracles.sphere_frame(2, 1.0, resolution=41, analytic=False), 0.15)
    worst = max(oracles.oracle_residual(spec, t) for spec, t in SHIPPED)
    ok = circle >= 4 and sphere >= 4 and worst <= 1e-6
    verdict_line(9, ok, f"cfl halving shrinks time-stepping error {circle:.1f}x (circle), {sphere:.1f}x (sphere); "
                        f"worst oracle residual {worst:.1e}")
    assert ok


SUITE_CONFIGS = {
    "sphere": "geometry = sphere\nd = 2\nt_end = 0.2\nsource = engine\nresolution = 41\n",
    "perturbed": "geometry = perturbed\nd = 2\nt_end = 0.2\nresolution = 41\n",
    "grim": "geometry = grim-reaper\nd = 1\nancient = true\nt_start = -2\nt_end = -1\nsource = discrete\nframes = 5\n",
}


def test_criterion_10_determinism(tmp_path, verdict_line):
    identical = True
    for name, text in SUITE_CONFIGS.items():
        cfg = tmp_path / f"{name}.cfg"
        cfg.write_text(text)
        outs = [str(tmp_path / f"{name}{k}") for k in range(2)]
        codes = [main(["suite", "--config", str(cfg), "--out", o, "--seed", "11"]) for o in outs]
        identical &= codes[0] == codes[1] == 0
        for rel in ("report.csv", "verdict.json", os.path.join("snapshots", "frame_00001.txt")):
            with open(os.path.join(outs[0], rel), "rb") as a, open(os.path.join(outs[1], rel), "rb") as b:
                identical &= a.read() == b.read()
    verdict_line(10, identical, f"{len(SUITE_CONFIGS)} suite scenarios rerun with seed 11: byte-identical reports")
    assert identical
