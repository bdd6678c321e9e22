import numpy as np
import pytest

from homogflow.avg import (AlphaTable, AveragedAlphaEvaluator,
                           build_alpha_table, mc_averaged_alpha,
                           solve_averaged)
from homogflow.coeffs import (AlphaSpec, CoefficientSet, ForcingSpec,
                              TensorSpec)
from homogflow.fastsde import make_spectral_noise
from homogflow.grid import (FieldPair, Mesh, ScalarField, dirichlet_eigenvalue,
                            dirichlet_mode)
from homogflow.seeding import make_rng
from homogflow.slowpde import EpsilonRunConfig, simulate


SHIPPED_ALPHAS = [
    AlphaSpec(kind="constant", c0=0.7),
    AlphaSpec(kind="separable", c0=1.0, c1=0.0, saturation="sin_eta1"),
    AlphaSpec(kind="separable", c0=0.8, c1=0.4, saturation="tanh_mix",
              w1=1.0, w2=-0.7),
    AlphaSpec(kind="smooth_mixed", c0=0.5, c1=0.25, saturation="tanh_eta1"),
    AlphaSpec(kind="smooth_mixed", c0=0.5, c1=0.3, y_shape="sin_sq",
              saturation="tanh_mix", w1=0.5, w2=0.5),
]


class TestAveragedAlpha:
    def test_constant_for_any_arguments(self):
        ev = AveragedAlphaEvaluator(AlphaSpec(kind="constant", c0=0.7))
        got = ev.averaged_alpha(np.array([0.0, 3.0]), np.array([-1.0, 2.0]),
                                np.array([0.0, 4.0]), np.array([1.0, 0.2]))
        assert np.all(got == 0.7)

    def test_zero_variance_collapses_to_y_average(self):
        spec = AlphaSpec(kind="smooth_mixed", c0=0.5, c1=0.25,
                         saturation="tanh_eta1")
        ev = AveragedAlphaEvaluator(spec)
        # int_Y sin(2 pi y) dy = 0, so the y-average equals c0 at any mean
        assert ev.averaged_alpha(0.8, 0.0, 0.0, 0.0) == pytest.approx(0.5,
                                                                      abs=1e-14)

    def test_sin_gaussian_closed_form(self):
        # characteristic-function identity: E sin(Z) = sin(m) e^(-s/2)
        ev = AveragedAlphaEvaluator(
            AlphaSpec(kind="separable", c0=1.0, saturation="sin_eta1"),
            gh_order=20)
        got = ev.averaged_alpha(0.3, 0.0, 0.5, 0.0)
        exact = np.sin(0.3) * np.exp(-0.25)
        assert exact == pytest.approx(0.2301514, abs=1e-7)
        assert abs(got - exact) < 1e-6

    def test_negative_variance_rejected(self):
        ev = AveragedAlphaEvaluator(SHIPPED_ALPHAS[2])
        with pytest.raises(ValueError):
            ev.averaged_alpha(0.0, 0.0, -1.0, 0.0)

    def test_order_guard(self):
        with pytest.raises(ValueError):
            AveragedAlphaEvaluator(SHIPPED_ALPHAS[0], gh_order=1)

    def test_bounded_by_alpha_bound(self):
        spec = SHIPPED_ALPHAS[2]
        ev = AveragedAlphaEvaluator(spec)
        xs = np.linspace(-6, 6, 25)
        vals = ev.averaged_alpha(xs, -xs, np.full(25, 3.0), np.full(25, 0.5))
        assert np.abs(vals).max() <= spec.bound + 1e-12

    def test_lipschitz_transfer(self):
        spec = SHIPPED_ALPHAS[3]
        ev = AveragedAlphaEvaluator(spec)
        rng = make_rng(17)
        a = 3.0 * rng.standard_normal((64, 2))
        b = 3.0 * rng.standard_normal((64, 2))
        s1, s2 = 0.4, 0.9
        va = ev.averaged_alpha(a[:, 0], a[:, 1], np.full(64, s1),
                               np.full(64, s2))
        vb = ev.averaged_alpha(b[:, 0], b[:, 1], np.full(64, s1),
                               np.full(64, s2))
        dist = np.linalg.norm(a - b, axis=1)
        assert np.all(np.abs(va - vb) <= spec.lip * dist + 1e-12)

    @pytest.mark.parametrize("spec", SHIPPED_ALPHAS,
                             ids=[f"alpha{i}" for i in range(5)])
    def test_quadrature_vs_monte_carlo(self, spec):
        ev = AveragedAlphaEvaluator(spec, gh_order=20)
        rng = make_rng(4)
        xi1, xi2, s1, s2 = 0.4, -0.2, 0.6, 0.3
        mc, half = mc_averaged_alpha(spec, xi1, xi2, s1, s2, 100_000, rng)
        quad = float(ev.averaged_alpha(xi1, xi2, s1, s2))
        if spec.kind == "constant":
            assert mc == quad and half == 0.0
        else:
            assert abs(mc - quad) <= 3.0 * half

    def test_mc_zero_variance_is_exact(self):
        spec = SHIPPED_ALPHAS[3]
        ev = AveragedAlphaEvaluator(spec)
        mc, half = mc_averaged_alpha(spec, 0.7, 0.1, 0.0, 0.0, 2000,
                                     make_rng(0))
        assert mc == pytest.approx(float(ev.averaged_alpha(0.7, 0.1, 0.0, 0.0)),
                                   abs=1e-12)
        assert half < 1e-12

    def test_mc_needs_replicas(self):
        with pytest.raises(ValueError):
            mc_averaged_alpha(SHIPPED_ALPHAS[0], 0, 0, 1, 1, 10, make_rng(0))

    def test_pointwise_variant_matches_direct_alpha_at_zero_variance(self):
        from homogflow.coeffs import eval_alpha_many
        spec = SHIPPED_ALPHAS[3]
        ev = AveragedAlphaEvaluator(spec)
        pts = np.linspace(0, 1, 17)[:, None]
        xi1 = np.linspace(-1, 1, 17)
        xi2 = np.zeros(17)
        got = ev.averaged_alpha_pointwise(pts, xi1, xi2, np.zeros(17),
                                          np.zeros(17))
        direct = eval_alpha_many(spec, pts, xi1, xi2)
        assert np.abs(got - direct).max() < 1e-12

    def test_table_cache_interpolates(self):
        ev = AveragedAlphaEvaluator(SHIPPED_ALPHAS[2])
        table = build_alpha_table(ev, (-2, 2), (-2, 2), 0.5, 0.5,
                                  resolution=257)
        pts = np.linspace(-1.9, 1.9, 23)
        exact = ev.averaged_alpha(pts, pts[::-1], np.full(23, 0.5),
                                  np.full(23, 0.5))
        assert np.abs(table(pts, pts[::-1]) - exact).max() < 5e-4


class TestSolveAveraged:
    def setup_run(self, alpha, a_eff1=None, a_eff2=None, sigma=0.0, mesh=None):
        mesh = mesh or Mesh(1, 64)
        noise = make_spectral_noise(mesh, truncation=8, sigma1=sigma,
                                    sigma2=sigma)
        cs = CoefficientSet(A1=TensorSpec(), A2=TensorSpec(), alpha=alpha,
                            beta=((1.0, 0.5), (0.5, 1.0)))
        u0 = FieldPair(dirichlet_mode(mesh, 1),
                       ScalarField(mesh, 0.5 * np.sin(
                           2 * np.pi * mesh.coords()[:, 0])))
        return mesh, noise, cs, u0

    def test_decoupled_heat_eigendecay(self):
        mesh, noise, cs, _ = self.setup_run(AlphaSpec(kind="constant", c0=0.0))
        v = dirichlet_mode(mesh, 1)
        traj = solve_averaged(mesh, cs, np.array([[1.0]]), np.array([[1.0]]),
                              noise, 0.01, 0.1, FieldPair(v, v.copy()))
        lam = dirichlet_eigenvalue(mesh, 1)
        expect = (1 + 0.01 * lam) ** (-10) * v.values
        assert np.abs(traj.u1[-1] - expect).max() < 1e-13

    def test_symmetry_collapse(self):
        mesh, noise, cs, _ = self.setup_run(
            AlphaSpec(kind="separable", c0=0.8, c1=0.4, saturation="tanh_mix",
                      w1=1.0, w2=-0.7), sigma=0.5)
        v = dirichlet_mode(mesh, 1)
        traj = solve_averaged(mesh, cs, np.array([[1.3]]), np.array([[1.3]]),
                              noise, 0.01, 0.2, FieldPair(v, v.copy()))
        assert np.abs(traj.u1 - traj.u2).max() < 1e-12

    def test_degenerate_coincides_with_epsilon_run(self):
        # zero noise + constant-in-y coefficients: both schemes are identical
        mesh = Mesh(1, 128)
        noise = make_spectral_noise(mesh, truncation=8, sigma1=0.0, sigma2=0.0)
        cs = CoefficientSet(A1=TensorSpec(kind="constant", matrix=(1.3,)),
                            A2=TensorSpec(kind="constant", matrix=(0.9,)),
                            alpha=AlphaSpec(kind="constant", c0=0.7),
                            f1=ForcingSpec(kind="sine_decay", amplitude=1.0),
                            f2=ForcingSpec(kind="sine_decay", amplitude=0.5,
                                           mode=2),
                            beta=((1.0, 0.5), (0.5, 1.0)))
        u0 = FieldPair(dirichlet_mode(mesh, 1),
                       ScalarField(mesh, 0.5 * np.sin(
                           2 * np.pi * mesh.coords()[:, 0])))
        eps_cfg = EpsilonRunConfig(mesh=mesh, coeffs=cs, noise=noise,
                                   epsilon=0.25, t_final=0.2, dt=0.01, u0=u0,
                                   base_seed=5)
        eps_traj = simulate(eps_cfg)
        avg_traj = solve_averaged(mesh, cs, np.array([[1.3]]),
                                  np.array([[0.9]]), noise, 0.01, 0.2, u0)
        assert np.abs(eps_traj.u1 - avg_traj.u1).max() < 1e-10
        assert np.abs(eps_traj.u2 - avg_traj.u2).max() < 1e-10

    def test_energy_bounds_stable_under_dt_halving(self):
        mesh, noise, cs, u0 = self.setup_run(
            AlphaSpec(kind="separable", c0=0.8, c1=0.4, saturation="tanh_mix",
                      w1=1.0, w2=-0.7), sigma=0.5)
        stats = []
        for dt in (0.01, 0.005):
            traj = solve_averaged(mesh, cs, np.array([[1.5]]),
                                  np.array([[1.2]]), noise, dt, 0.2, u0)
            stats.append((traj.diagnostics["sup_l2_u1"],
                          traj.diagnostics["grad_energy_u1"]))
        assert stats[0][0] == pytest.approx(stats[1][0], rel=0.05)
        assert stats[0][1] == pytest.approx(stats[1][1], rel=0.05)
