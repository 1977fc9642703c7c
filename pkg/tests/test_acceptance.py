"""Acceptance suite: one test (and one PASS/FAIL line) per criterion.

Thresholds are the stated ones. Some criteria fail on this model; those
assertions are kept as stated rather than relaxed.
"""

import json
import math
import pathlib
import time

import numpy as np
import pytest

from blochreach import config as cfgmod
from blochreach.cli import main
from blochreach.dynamics import (
    IntegratorConfig,
    integrate_batch,
    linear_propagator_arrays,
    nonlinear_batch_rhs,
    propagate_nonlinear,
)
from blochreach.lyapunov import (
    ControlLawConfig,
    H1Choice,
    TargetConfig,
    control_f_closed,
    control_f_general,
    field_and_distance_arrays,
    integrate_controlled_batch,
)
from blochreach.qcore import (
    HamiltonianParams,
    QubitState,
    TransformParams,
    bloch_arrays,
    conjugate_hamiltonian,
    expand_transformed_coefficients,
    linear_hamiltonian,
    nonlinear_hamiltonian,
    transform_f,
)
from blochreach.reach import coverage, run_sweep

GOLDEN = pathlib.Path(__file__).parent / "golden"
SPOT = [(R, v) for R in (0.0, 3.5, 7.0) for v in (0.0, 3.5, 7.0)]
SMALL = [(R, v) for R in (0.0, 0.25, 0.5) for v in (0.0, 0.25, 0.5)]
E = QubitState.excited()

_sweeps = {}


def preset_coverage(preset, overrides=None, workers=1):
    """Coverage of a full-size preset sweep, cached per argument set.

    ``overrides`` maps ``"section.key"`` to a value.
    """
    overrides = overrides or {}
    key = (preset, tuple(sorted((k, str(v)) for k, v in overrides.items())))
    if key not in _sweeps:
        cp = cfgmod.load(preset=preset)
        data = {}
        for dotted, value in overrides.items():
            section, name = dotted.split(".")
            data.setdefault(section, {})[name] = str(value)
        cfgmod.merge(cp, data, "test")
        start = time.perf_counter()
        cloud = run_sweep(cfgmod.sweep_config(cp), workers=workers)
        elapsed = time.perf_counter() - start
        rep = coverage(cloud, cfgmod.partition(cp))
        _sweeps[key] = (rep, cloud, elapsed)
    return _sweeps[key]


def batch_norm_drift(R, v, C, t_stop=4.0, dt=1e-3):
    """Per-run max |norm - 1| after every RK4 step, renormalization off."""
    R, v = np.asarray(R, float), np.asarray(v, float)
    worst = np.zeros(len(R))

    def watch(_old, new, _h):
        np.maximum(worst, np.abs(np.sqrt(np.abs(new[:, 0]) ** 2 + np.abs(new[:, 1]) ** 2) - 1), out=worst)

    y0 = np.tile(E.to_array(), (len(R), 1))
    cfg = IntegratorConfig(dt=dt, renormalize_every_step=False, norm_drift_tolerance=1.0)
    integrate_batch(nonlinear_batch_rhs(R, v, C), y0, [t_stop], cfg, on_step=watch)
    return worst


def test_criterion_01_norm_conservation(report):
    start = time.perf_counter()
    R, v = np.array(SPOT).T
    per_c = {C: float(np.max(batch_norm_drift(R, v, C))) for C in (0.0, 2.0, 20.0, 100.0)}
    elapsed = time.perf_counter() - start
    worst = max(per_c.values())
    ok = worst <= 1e-8 and elapsed < 10
    table = ", ".join(f"C={C:g}: {d:.2e}" for C, d in per_c.items())
    report(1, ok, f"max |norm-1| = {worst:.3e} (bound 1e-8) [{table}] in {elapsed:.1f} s")
    assert elapsed < 10
    assert worst <= 1e-8, per_c


def test_criterion_02_c0_matches_closed_form(report):
    start = time.perf_counter()
    worst = 0.0
    for R, v in SPOT:
        got = propagate_nonlinear(
            HamiltonianParams(R, v, 0.0), E, 4.0, IntegratorConfig(1e-3, False, 1e-6)
        ).to_array()
        u00, _, u10, _ = linear_propagator_arrays(R, v, 4.0)
        want = np.array([complex(u00), complex(u10)])
        # got = e^{i alpha} want up to error; divide the phase out before comparing
        ov = np.vdot(want, got)
        worst = max(worst, float(np.max(np.abs(got * np.conj(ov) / abs(ov) - want))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 5
    report(2, ok, f"max phase-aligned amplitude error {worst:.3e} (bound 1e-8) in {elapsed:.2f} s")
    assert elapsed < 5
    assert worst <= 1e-8


@pytest.mark.slow
def test_fig1_coverage_matches_golden():
    golden = json.loads((GOLDEN / "fig1_coverage.json").read_text())
    rep, cloud, _ = preset_coverage("fig1", workers=4)
    assert rep.occupied_cells == golden["occupied_cells"]
    assert rep.coverage == golden["coverage"]
    # every orbit from |e> with R, v >= 0 stays in p_x >= 0, which caps coverage near one half
    assert np.min(cloud.p[:, 0]) > -1e-12


@pytest.mark.slow
def test_criterion_03_fig1_linear_coverage(report):
    rep, _, elapsed = preset_coverage("fig1", workers=4)
    ok = rep.coverage >= 0.95 and elapsed < 120
    report(3, ok, f"fig1 coverage {rep.coverage:.6f} ({rep.occupied_cells}/{rep.total_cells}), "
                  f"needs >= 0.95; sweep {elapsed:.1f} s")
    assert elapsed < 120
    assert rep.coverage >= 0.95


FIG2_C = (2.0, 6.0, 8.0, 10.0, 12.0, 14.0, 20.0, 100.0)


@pytest.mark.slow
def test_criterion_04_fig2_nonlinear_shrinkage(report):
    start = time.perf_counter()
    cov = {C: preset_coverage("fig2", {"system.C": C})[0].coverage for C in (0.0,) + FIG2_C}
    elapsed = time.perf_counter() - start
    ordered = cov[2.0] > cov[20.0] > cov[100.0]
    below = [C for C in FIG2_C if not cov[C] < cov[0.0]]
    strictly = all(cov[a] > cov[b] for a, b in zip(FIG2_C, FIG2_C[1:]))
    table = ", ".join(f"C={C:g}: {c:.4f}" for C, c in cov.items())
    ok = ordered and not below and elapsed < 900
    report(4, ok, f"[{table}] C2>C20>C100: {ordered}; not below C=0 at C in {below}; "
                  f"strictly decreasing (reported only): {strictly}; {elapsed:.0f} s")
    assert elapsed < 900
    assert ordered
    assert not below, f"coverage not below the linear value at C={below}"


def test_criterion_05_lyapunov_monotone(report):
    start = time.perf_counter()
    R, v = np.array(SMALL).T
    dt = 1e-3
    icfg = IntegratorConfig(dt=dt, renormalize_every_step=False)
    worst_margin = -math.inf
    worst_at = None
    for h1 in H1Choice:
        for kappa in (0.0, 3.0, 9.0, 27.0):
            cfg = ControlLawConfig(kappa=kappa, h1_choice=h1, target=TargetConfig(perturbation_angle=0.01))
            _, rates, _ = integrate_controlled_batch(R, v, E, cfg, [4.0], icfg)
            # per-step dV <= 1e-8 (1 + kappa) dt  <=>  dV / dt <= 1e-8 (1 + kappa)
            margin = float(np.max(rates)) - 1e-8 * (1 + kappa)
            if margin > worst_margin:
                worst_margin, worst_at = margin, (h1.value, kappa, float(np.max(rates)))
    elapsed = time.perf_counter() - start
    ok = worst_margin <= 0 and elapsed < 30
    report(5, ok, f"largest dV/dt per step {worst_at[2]:.3e} at h1={worst_at[0]}, kappa={worst_at[1]:g} "
                  f"(limit 1e-8(1+kappa)); {elapsed:.1f} s")
    assert elapsed < 30
    assert worst_margin <= 0


def test_criterion_06_coincident_target(report):
    start = time.perf_counter()
    R, v = np.array(SMALL).T
    grid = np.linspace(0.0, 4.0, 81)[1:]
    max_f = max_v = max_dev = 0.0
    for h1 in H1Choice:
        for kappa in (3.0, 9.0, 27.0):
            cfg = ControlLawConfig(kappa=kappa, h1_choice=h1)
            out, _, _ = integrate_controlled_batch(R, v, E, cfg, grid)
            f, V = field_and_distance_arrays(out, cfg)
            max_f = max(max_f, float(np.max(np.abs(f))))
            max_v = max(max_v, float(np.max(V)))
            got = np.stack(bloch_arrays(out[..., 0], out[..., 1]), axis=-1)
            u00, _, u10, _ = linear_propagator_arrays(R[None, :], v[None, :], grid[:, None])
            want = np.stack(bloch_arrays(u00, u10), axis=-1)
            max_dev = max(max_dev, float(np.max(np.abs(got - want))))
    elapsed = time.perf_counter() - start
    ok = max_f <= 1e-10 and max_v <= 1e-10 and max_dev <= 1e-7 and elapsed < 5
    report(6, ok, f"max|f| {max_f:.1e}, max V {max_v:.1e}, Bloch deviation from linear flow {max_dev:.2e}; "
                  f"{elapsed:.2f} s")
    assert elapsed < 5
    assert max_f <= 1e-10 and max_v <= 1e-10
    assert max_dev <= 1e-7


@pytest.mark.slow
def test_criterion_07_fig4_control_enlarges_set(report):
    start = time.perf_counter()
    cov = {}
    for kappa in (0.0, 3.0, 9.0, 27.0):
        rep = preset_coverage("fig4", {"control.kappa": kappa, "control.perturbation_angle": 0.01})[0]
        cov[kappa] = rep.coverage
    elapsed = time.perf_counter() - start
    table = ", ".join(f"kappa={k:g}: {c:.5f}" for k, c in cov.items())
    ok = cov[3.0] > cov[0.0] and elapsed < 300
    report(7, ok, f"[{table}] needs kappa=3 > kappa=0; {elapsed:.0f} s")
    assert elapsed < 300
    assert cov[3.0] > cov[0.0]


def test_criterion_08_law_ratio_constant(report):
    start = time.perf_counter()
    rng = np.random.default_rng(8)
    cfg = ControlLawConfig(kappa=1.7, h1_choice=H1Choice.STATE_DEPENDENT_SIGMA_Z, sign_convention="plus")
    ratios = []
    while len(ratios) < 100:
        x = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi = QubitState.normalized(x[0], x[1])
        psi_d = QubitState.normalized(x[2], x[3])
        general = control_f_general(psi_d, psi, cfg)
        if abs(general) < 1e-6:
            continue
        ratios.append(control_f_closed(psi.a, psi.b, psi_d.a, psi_d.b, cfg.kappa) / general)
    ratios = np.array(ratios)
    const = float(np.median(ratios))
    spread = float(np.max(np.abs(ratios / const - 1)))
    elapsed = time.perf_counter() - start
    ok = spread <= 1e-10 and elapsed < 1
    report(8, ok, f"closed/general ratio = {const:.12g}, max relative spread {spread:.1e}; {elapsed:.2f} s")
    assert elapsed < 1
    assert spread <= 1e-10
    assert const == pytest.approx(2.0, rel=1e-10)


def test_criterion_09_transform_checks(report):
    start = time.perf_counter()
    rng = np.random.default_rng(9)
    angles = [TransformParams(rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi)) for _ in range(1000)]
    unitary_err = max(
        float(np.max(np.abs(transform_f(t).matrix.conj().T @ transform_f(t).matrix - np.eye(2)))) for t in angles
    )
    invariant_err = 0.0
    expansion_res = 0.0
    for t in angles[:200]:
        R, v, C = rng.uniform(-7, 7, size=3)
        s = QubitState.normalized(*(rng.normal(size=2) + 1j * rng.normal(size=2)))
        h = nonlinear_hamiltonian(HamiltonianParams(R, v, C), s)
        hp = conjugate_hamiltonian(h, t)
        invariant_err = max(invariant_err, abs(hp.trace() - h.trace()), abs(hp.det() - h.det()))
        _, cx, cy, cz = hp.pauli_coefficients()
        r_nl = R - C * (abs(s.a) ** 2 - abs(s.b) ** 2)
        ez, ex, ey = expand_transformed_coefficients(r_nl, v, t)
        expansion_res = max(expansion_res, abs(cz - ez), abs(cx - ex), abs(cy - ey))
    h0 = linear_hamiltonian(HamiltonianParams(1.3, 0.4))
    identity_err = float(np.max(np.abs(conjugate_hamiltonian(h0, TransformParams(0, 0)).matrix - h0.matrix)))
    elapsed = time.perf_counter() - start
    ok = unitary_err <= 1e-12 and invariant_err <= 1e-10 and identity_err == 0.0 and elapsed < 1
    report(9, ok, f"unitarity {unitary_err:.1e}, trace/det {invariant_err:.1e}, identity {identity_err:.1e}, "
                  f"expansion residual {expansion_res:.1e}; {elapsed:.2f} s")
    assert elapsed < 1
    assert unitary_err <= 1e-12
    assert invariant_err <= 1e-10
    assert identity_err == 0.0


@pytest.mark.slow
def test_criterion_10_workers_byte_identical(tmp_path, report):
    start = time.perf_counter()
    common = ["sweep", "--preset", "fig2", "--C", "20"]
    assert main([*common, "--workers", "1", "--out", str(tmp_path / "w1")]) == 0
    assert main([*common, "--workers", "8", "--out", str(tmp_path / "w8")]) == 0
    a = (tmp_path / "w1" / "cloud.csv").read_bytes()
    b = (tmp_path / "w8" / "cloud.csv").read_bytes()
    elapsed = time.perf_counter() - start
    ok = a == b and elapsed < 240
    report(10, ok, f"cloud.csv {len(a)} bytes, identical for 1 and 8 workers: {a == b}; {elapsed:.1f} s")
    assert elapsed < 240
    assert a == b


def test_criterion_11_rk4_order(report):
    start = time.perf_counter()
    params = HamiltonianParams(1.0, 2.0, 6.0)
    ref = propagate_nonlinear(params, E, 1.0, IntegratorConfig(1e-4, False, 1.0)).to_array()
    hs = (0.04, 0.02, 0.01)
    errs = [
        np.linalg.norm(propagate_nonlinear(params, E, 1.0, IntegratorConfig(h, False, 1.0)).to_array() - ref)
        for h in hs
    ]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    elapsed = time.perf_counter() - start
    ok = all(3.5 <= p <= 4.5 for p in orders) and elapsed < 5
    report(11, ok, f"measured orders {', '.join(f'{p:.3f}' for p in orders)}; {elapsed:.2f} s")
    assert elapsed < 5
    assert all(3.5 <= p <= 4.5 for p in orders)
