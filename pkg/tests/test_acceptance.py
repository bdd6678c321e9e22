"""Acceptance suite: the nine study-level criteria, one test each.

Each test prints one pass/fail line (visible under pytest -s / -v) including
its elapsed time against the stated budget.  Criteria 7-9 run end to end
through the harness on the shipped study configurations.
"""

import os
import time

import numpy as np
import pytest

from homogflow.avg import AveragedAlphaEvaluator, mc_averaged_alpha, solve_averaged
from homogflow.cell import solve_cell
from homogflow.coeffs import (AlphaSpec, CoefficientSet, ForcingSpec,
                              TensorSpec)
from homogflow.ergodic import (ExchangeProbe, LinearProbe, mixing_report,
                               s_decomposition, window_average_error)
from homogflow.fastsde import (make_ou_state, make_spectral_noise,
                               mild_reference, ou_step,
                               coupling_contraction_check)
from homogflow.grid import (PERIODIC, FieldPair, Mesh, ScalarField,
                            dirichlet_mode)
from homogflow.harness import emit_report, load_config, run_convergence
from homogflow.seeding import derive_seed, make_rng
from homogflow.slowpde import (EpsilonRunConfig, Trajectory, simulate,
                               weak_residual)

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


def report_line(name, budget, started, detail=""):
    elapsed = time.perf_counter() - started
    print(f"\n[acceptance] {name}: PASS in {elapsed:.1f}s "
          f"(budget {budget:.0f}s) {detail}")
    assert elapsed < budget


@pytest.fixture(scope="module")
def study_config():
    return load_config(os.path.join(CONFIG_DIR, "converge_1d.toml"))


@pytest.fixture(scope="module")
def study_report(study_config):
    started = time.perf_counter()
    report = run_convergence(study_config)
    return report, time.perf_counter() - started


def test_criterion_1_cell_golden_values():
    started = time.perf_counter()
    const = solve_cell(TensorSpec(kind="constant", matrix=(1.7,)),
                       Mesh(1, 64, PERIODIC))
    assert abs(const.A_eff[0, 0] - 1.7) < 1e-10
    const2 = solve_cell(TensorSpec(kind="constant",
                                   matrix=(2.0, 0.3, 0.3, 1.5)),
                        Mesh(2, 16, PERIODIC))
    assert np.abs(const2.A_eff - [[2.0, 0.3], [0.3, 1.5]]).max() < 1e-10

    sin1d = solve_cell(TensorSpec(kind="scalar_sin", base=2.0, amplitude=1.0),
                       Mesh(1, 256, PERIODIC))
    assert abs(sin1d.A_eff[0, 0] - np.sqrt(3.0)) < 1e-4

    lam = solve_cell(TensorSpec(kind="laminate", base=2.0, amplitude=1.0),
                     Mesh(2, 128, PERIODIC))
    assert abs(lam.A_eff[0, 0] - np.sqrt(3.0)) < 1e-3
    assert abs(lam.A_eff[1, 1] - 2.0) < 1e-3
    report_line("criterion 1 (cell golden values)", 10, started,
                f"A_eff(1D)={sin1d.A_eff[0, 0]:.8f}")


def test_criterion_2_ou_law_exactness():
    started = time.perf_counter()
    mesh = Mesh(1, 64)
    noise = make_spectral_noise(mesh, truncation=16, sigma1=1.0, sigma2=0.7)
    rng = make_rng(31)
    x = mesh.coords()[:, 0]
    eta = FieldPair(ScalarField(mesh, noise.synthesize(
        rng.standard_normal(16))), ScalarField(mesh, np.zeros(mesh.ndof)))
    xi = FieldPair(ScalarField(mesh, np.sin(np.pi * x)),
                   ScalarField(mesh, 0.5 * np.sin(2 * np.pi * x)))
    incs = rng.standard_normal((32, 2, 16))
    state = make_ou_state(noise, eta)
    for m in range(32):
        state = ou_step(state, xi, 0.8 / 32, 0.05, noise,
                        increments=(incs[m, 0], incs[m, 1]))
    ref = mild_reference(eta, xi, 0.8, 0.05, noise, incs)
    assert np.array_equal(state.c1, ref.c1)
    assert np.array_equal(state.c2, ref.c2)

    # stationary per-mode variance lambda/2 over 1e5 replicas
    one = make_spectral_noise(mesh, truncation=1, sigma1=1.0, sigma2=1.0)
    replicas = 100_000
    c = np.zeros(replicas)
    rho = np.exp(-0.2)
    scale = np.sqrt(0.5 * one.lam1[0] * (1 - rho * rho))
    mc_rng = make_rng(derive_seed(12, "MC", 0))
    for _ in range(60):
        c = c * rho + scale * mc_rng.standard_normal(replicas)
    var = float(np.var(c))
    assert abs(var - 0.5) < 0.01

    eta2 = FieldPair(ScalarField(mesh, eta.f1.values
                                 + noise.synthesize(rng.standard_normal(16))),
                     eta.f2.copy())
    eps = 0.07
    ratio = coupling_contraction_check(eta, eta2, xi, eps * np.log(2.0), eps,
                                       noise, make_rng(8))
    assert abs(ratio - 0.5) < 1e-12
    report_line("criterion 2 (OU law exactness)", 30, started,
                f"stationary var={var:.4f}")


def test_criterion_3_averaged_alpha():
    started = time.perf_counter()
    shipped = [
        AlphaSpec(kind="constant", c0=0.7),
        AlphaSpec(kind="separable", c0=1.0, saturation="sin_eta1"),
        AlphaSpec(kind="separable", c0=0.8, c1=0.4, saturation="tanh_mix",
                  w1=1.0, w2=-0.7),
        AlphaSpec(kind="smooth_mixed", c0=0.5, c1=0.25,
                  saturation="tanh_eta1"),
        AlphaSpec(kind="smooth_mixed", c0=0.5, c1=0.3, y_shape="sin_sq",
                  saturation="tanh_mix", w1=0.5, w2=0.5),
    ]
    for i, spec in enumerate(shipped):
        ev = AveragedAlphaEvaluator(spec, gh_order=20)
        quad = float(ev.averaged_alpha(0.4, -0.2, 0.6, 0.3))
        mc, half = mc_averaged_alpha(spec, 0.4, -0.2, 0.6, 0.3, 100_000,
                                     make_rng(derive_seed(5, "MC", i)))
        assert abs(mc - quad) <= max(3.0 * half, 1e-14)

    ev = AveragedAlphaEvaluator(
        AlphaSpec(kind="separable", c0=1.0, saturation="sin_eta1"),
        gh_order=20)
    got = float(ev.averaged_alpha(0.3, 0.0, 0.5, 0.0))
    exact = float(np.sin(0.3) * np.exp(-0.25))
    assert abs(got - exact) < 1e-6
    report_line("criterion 3 (averaged exchange coefficient)", 30, started,
                f"sin case |quad-closed|={abs(got - exact):.2e}")


def test_criterion_4_epsilon_solver_structure():
    started = time.perf_counter()
    mesh = Mesh(1, 64)
    noise = make_spectral_noise(mesh, truncation=8, sigma1=0.5, sigma2=0.5)
    x = mesh.coords()[:, 0]
    v = dirichlet_mode(mesh, 1)

    sym = CoefficientSet(
        A1=TensorSpec(kind="scalar_sin", base=2, amplitude=1),
        A2=TensorSpec(kind="scalar_sin", base=2, amplitude=1),
        alpha=AlphaSpec(kind="separable", c0=0.8, c1=0.4,
                        saturation="tanh_mix", w1=1.0, w2=-0.7, nonneg=True),
        f1=ForcingSpec(kind="sine_decay", amplitude=1.0),
        f2=ForcingSpec(kind="sine_decay", amplitude=1.0),
        beta=((1.0, 0.5), (1.0, 0.5)))
    traj = simulate(EpsilonRunConfig(mesh=mesh, coeffs=sym, noise=noise,
                                     epsilon=0.1, t_final=0.2, dt=0.01,
                                     u0=FieldPair(v, v.copy()), base_seed=3))
    assert np.abs(traj.u1 - traj.u2).max() < 1e-12

    diss = CoefficientSet(
        A1=TensorSpec(kind="scalar_sin", base=2, amplitude=1),
        A2=TensorSpec(),
        alpha=AlphaSpec(kind="separable", c0=0.8, c1=0.4,
                        saturation="tanh_mix", w1=1.0, w2=-0.7, nonneg=True),
        beta=((1.0, 0.5), (0.5, 1.0)))
    u0 = FieldPair(v, ScalarField(mesh, 0.5 * np.sin(2 * np.pi * x)))
    traj = simulate(EpsilonRunConfig(mesh=mesh, coeffs=diss, noise=noise,
                                     epsilon=0.1, t_final=0.3, dt=0.01,
                                     u0=u0, base_seed=1))
    energy = np.einsum("ij,ij->i", traj.u1, traj.u1) \
        + np.einsum("ij,ij->i", traj.u2, traj.u2)
    assert np.all(np.diff(energy) <= energy[:-1] * 1e-12)

    # manufactured solution u = sin(pi x) e^(-t): residual halves with dt
    def manufactured_residual(dt):
        m = Mesh(1, 256)
        xs = m.coords()[:, 0]
        nz = make_spectral_noise(m, truncation=4)
        cs = CoefficientSet(
            A1=TensorSpec(), A2=TensorSpec(),
            alpha=AlphaSpec(kind="constant", c0=0.0),
            f1=ForcingSpec(kind="sine_decay", amplitude=np.pi ** 2 - 1,
                           rate=1.0),
            f2=ForcingSpec(kind="sine_decay", amplitude=np.pi ** 2 - 1,
                           rate=1.0))
        steps = int(round(0.5 / dt))
        times = np.arange(steps + 1) * dt
        u = np.array([np.sin(np.pi * xs) * np.exp(-t) for t in times])
        vz = np.zeros((steps + 1, m.ndof))
        tr = Trajectory(mesh=m, times=times, u1=u, u2=u.copy(), v1=vz,
                        v2=vz.copy(), dt=dt, epsilon=0.25, diagnostics={})
        cfg = EpsilonRunConfig(mesh=m, coeffs=cs, noise=nz, epsilon=0.25,
                               t_final=0.5, dt=dt, u0=tr.field_pair(0))
        return weak_residual(cfg, tr, dirichlet_mode(m, 1),
                             manufactured=True)

    r1, r2 = manufactured_residual(0.05), manufactured_residual(0.025)
    assert r1 / r2 == pytest.approx(2.0, rel=0.15)
    report_line("criterion 4 (epsilon-solver structure)", 60, started,
                f"residual ratio={r1 / r2:.3f}")


def test_criterion_5_mixing_estimate():
    started = time.perf_counter()
    mesh = Mesh(1, 128)
    noise = make_spectral_noise(mesh, truncation=16, sigma1=0.7, sigma2=0.7)
    w = dirichlet_mode(mesh, 1).values
    probe = LinearProbe(w1=w, w2=np.zeros(mesh.ndof), mesh=mesh)
    xi = FieldPair(ScalarField(mesh, 0.3 * w),
                   ScalarField(mesh, np.zeros(mesh.ndof)))
    eta = FieldPair(ScalarField(mesh, 5.3 * w),
                    ScalarField(mesh, np.zeros(mesh.ndof)))
    rep = mixing_report(probe, xi, eta, [0.5, 1.0, 1.5, 2.0, 2.5], 10_000,
                        noise, make_rng(derive_seed(2024, "MIXING", 0)))
    assert 0.8 <= rep.fitted_rate <= 1.2
    report_line("criterion 5 (mixing estimate)", 120, started,
                f"fitted rate={rep.fitted_rate:.4f}")


def test_criterion_6_window_average_shape():
    started = time.perf_counter()
    config = load_config(os.path.join(CONFIG_DIR, "ergodic_1d.toml"))
    mesh = config.mesh
    noise = config.build_noise()
    probe = ExchangeProbe(alpha=config.coeffs.alpha,
                          weight=dirichlet_mode(mesh, 1).values, mesh=mesh)
    u0 = config.initial_fields()
    p = config.ergodic_params
    eps_list = [p["window_eps_base"] * 0.5 ** k
                for k in range(int(p["window_halvings"]) + 1)]
    medians = []
    for eps in eps_list:
        errs = []
        for r in range(32):
            traj = simulate(EpsilonRunConfig(
                mesh=mesh, coeffs=config.coeffs, noise=noise, epsilon=eps,
                t_final=p["window_T"], dt=p["window_dt"], u0=u0,
                base_seed=config.base_seed, replica=r))
            wrng = make_rng(derive_seed(config.base_seed, "WINDOW", r))
            errs.append(window_average_error(
                probe, traj, p["window_t0"], float(np.sqrt(eps)),
                config.coeffs, noise, rng=wrng))
        medians.append(float(np.median(errs)))
    assert all(a > b for a, b in zip(medians, medians[1:]))
    report_line("criterion 6 (window-average shape)", 300, started,
                "medians " + np.array2string(np.asarray(medians), precision=4))


def test_criterion_7_convergence_study(study_config, study_report):
    report, study_elapsed = study_report
    started = time.perf_counter() - study_elapsed
    for metric in ("sup_l2_err_u1", "sup_l2_err_u2",
                   "weak_h1_err_u1", "weak_h1_err_u2"):
        med = report.medians(metric)
        assert np.all(np.diff(med) < 0.0), f"{metric} medians not decreasing"

    degenerate = load_config(os.path.join(CONFIG_DIR, "degenerate_1d.toml"))
    deg_report = run_convergence(degenerate)
    worst = max(max(r.sup_l2_err_u1, r.sup_l2_err_u2, r.weak_h1_err_u1,
                    r.weak_h1_err_u2) for r in deg_report.rows)
    assert worst < 5e-9
    report_line("criterion 7 (convergence study)", 900, started,
                f"degenerate worst={worst:.2e}")


def test_criterion_8_s_decomposition(study_config, study_report):
    report, _ = study_report
    started = time.perf_counter()
    for metric in ("s1", "s2", "s3"):
        med = np.asarray([np.median(report.values(e, metric))
                          for e in study_config.epsilons])
        assert np.all(np.diff(med) < 0.0), f"median |{metric}| not decreasing"

    # algebraic identity on one explicit decomposition
    mesh = Mesh(1, 64)
    noise = make_spectral_noise(mesh, truncation=8, sigma1=0.7, sigma2=0.7)
    cs = study_config.coeffs
    x = mesh.coords()[:, 0]
    u0 = FieldPair(ScalarField(mesh, np.sin(np.pi * x)),
                   ScalarField(mesh, 0.5 * np.sin(2 * np.pi * x)))
    eps_traj = simulate(EpsilonRunConfig(mesh=mesh, coeffs=cs, noise=noise,
                                         epsilon=0.25, t_final=0.25, dt=0.0125,
                                         u0=u0, base_seed=5))
    a1 = solve_cell(cs.A1, Mesh(1, 128, PERIODIC)).A_eff
    a2 = solve_cell(cs.A2, Mesh(1, 128, PERIODIC)).A_eff
    avg_traj = solve_averaged(mesh, cs, a1, a2, noise, 0.0125, 0.25, u0)
    sd = s_decomposition(eps_traj, avg_traj, cs, noise,
                         dirichlet_mode(mesh, 1).values,
                         np.ones(eps_traj.times.size))
    assert abs(sd.total - sd.total_direct) < 1e-12
    report_line("criterion 8 (S-decomposition)", 60, started,
                f"identity defect={abs(sd.total - sd.total_direct):.2e}")


def test_criterion_9_reproducibility(study_config, study_report, tmp_path):
    report, _ = study_report
    started = time.perf_counter()
    first = tmp_path / "first"
    second = tmp_path / "second"
    emit_report(report, str(first))
    repeat = run_convergence(
        load_config(os.path.join(CONFIG_DIR, "converge_1d.toml")))
    emit_report(repeat, str(second))
    for name in ("convergence.csv", "summary.csv", "sdecomp.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    report_line("criterion 9 (byte-identical reproducibility)", 900, started)
