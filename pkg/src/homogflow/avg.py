"""Averaged exchange coefficient and the averaged deterministic system.

The infinite-dimensional average of alpha over the invariant measure reduces
to pointwise two-dimensional Gaussian integrals: alpha acts pointwise, and at
each x the invariant law of (v1(x), v2(x)) is the bivariate normal with mean
(xi1(x), xi2(x)) and the independent pointwise variances (s1(x), s2(x)) built
from the two noise spectra.  The reduction is guarded by a Monte Carlo oracle
sampling the invariant measure directly.  Quadrature is a tensor
Gauss-Hermite rule of order q per eta-dimension, with the y-integral taken
once by midpoint quadrature (exact for the trigonometric modulations).
"""

from dataclasses import dataclass
import numpy as np

from .coeffs import (AlphaSpec, CoefficientSet, alpha_pointwise_coefficients,
                     alpha_y_average_coefficients, eval_forcing)
from .fastsde import SpectralNoise, invariant_marginal
from .grid import FieldPair, Mesh, ScalarField, SolverError, l2_norm, h1_seminorm
from .slowpde import DiffusionSolver, Trajectory, exchange_solve
from .coeffs import TensorSpec


@dataclass
class AveragedAlphaEvaluator:
    """Deterministic evaluator of the invariant-measure-averaged exchange field."""

    alpha: AlphaSpec
    gh_order: int = 20
    n_y: int = 64

    def __post_init__(self):
        if self.gh_order < 2:
            raise ValueError("Gauss-Hermite order must be >= 2")
        t, w = np.polynomial.hermite.hermgauss(self.gh_order)
        # tensor rule over (eta1, eta2); weights normalized against pi
        self._t1 = np.repeat(t, self.gh_order)
        self._t2 = np.tile(t, self.gh_order)
        self._w = np.outer(w, w).ravel() / np.pi
        self._a0, self._a1 = alpha_y_average_coefficients(self.alpha, self.n_y)

    def _sat_expectation(self, xi1, xi2, s1, s2) -> np.ndarray:
        """E s(Z1, Z2) with Z_i ~ N(xi_i, s_i) independent, tensor GH rule."""
        xi1 = np.asarray(xi1, dtype=float)
        xi2 = np.asarray(xi2, dtype=float)
        s1 = np.asarray(s1, dtype=float)
        s2 = np.asarray(s2, dtype=float)
        if np.any(s1 < 0.0) or np.any(s2 < 0.0):
            raise ValueError("variances must be nonnegative")
        z1 = xi1[..., None] + np.sqrt(2.0 * s1)[..., None] * self._t1
        z2 = xi2[..., None] + np.sqrt(2.0 * s2)[..., None] * self._t2
        vals = self.alpha._sat(z1, z2)
        return vals @ self._w

    def averaged_alpha(self, xi1, xi2, s1, s2):
        """bar-alpha at pointwise means (xi1, xi2) and variances (s1, s2)."""
        return self._a0 + self._a1 * self._sat_expectation(xi1, xi2, s1, s2)

    def averaged_alpha_pointwise(self, points: np.ndarray, xi1, xi2, s1, s2):
        """The y-pointwise variant: E alpha(y_i, Z1, Z2) at given cell points."""
        a0, a1 = alpha_pointwise_coefficients(self.alpha, points)
        return a0 + a1 * self._sat_expectation(xi1, xi2, s1, s2)


def mc_averaged_alpha(alpha: AlphaSpec, xi1: float, xi2: float, s1: float,
                      s2: float, replicas: int, rng,
                      n_y: int = 64) -> tuple:
    """Monte Carlo oracle for the quadrature path.

    Returns (mean, half_width) where half_width is one CLT standard error of
    the sample mean over invariant-measure draws.
    """
    if replicas < 1000:
        raise ValueError("Monte Carlo oracle needs at least 10^3 replicas")
    if s1 < 0.0 or s2 < 0.0:
        raise ValueError("variances must be nonnegative")
    a0, a1 = alpha_y_average_coefficients(alpha, n_y)
    z1 = xi1 + np.sqrt(s1) * rng.standard_normal(replicas)
    z2 = xi2 + np.sqrt(s2) * rng.standard_normal(replicas)
    vals = a0 + a1 * alpha._sat(z1, z2)
    mean = float(vals.mean())
    half = float(vals.std(ddof=1) / np.sqrt(replicas)) if replicas > 1 else 0.0
    return mean, half


@dataclass
class AlphaTable:
    """Bilinear interpolation cache of bar-alpha over a (xi1, xi2) box.

    Built for fixed scalar variances; intended for large runs where the
    pointwise variances are replaced by representative values.
    """

    xi1_grid: np.ndarray
    xi2_grid: np.ndarray
    values: np.ndarray

    def __call__(self, xi1, xi2):
        x = np.clip(xi1, self.xi1_grid[0], self.xi1_grid[-1])
        y = np.clip(xi2, self.xi2_grid[0], self.xi2_grid[-1])
        ix = np.clip(np.searchsorted(self.xi1_grid, x) - 1, 0,
                     self.xi1_grid.size - 2)
        iy = np.clip(np.searchsorted(self.xi2_grid, y) - 1, 0,
                     self.xi2_grid.size - 2)
        fx = (x - self.xi1_grid[ix]) / (self.xi1_grid[ix + 1] - self.xi1_grid[ix])
        fy = (y - self.xi2_grid[iy]) / (self.xi2_grid[iy + 1] - self.xi2_grid[iy])
        v = self.values
        return ((1 - fx) * (1 - fy) * v[ix, iy] + fx * (1 - fy) * v[ix + 1, iy]
                + (1 - fx) * fy * v[ix, iy + 1] + fx * fy * v[ix + 1, iy + 1])


def build_alpha_table(evaluator: AveragedAlphaEvaluator, xi1_range: tuple,
                      xi2_range: tuple, s1: float, s2: float,
                      resolution: int = 129) -> AlphaTable:
    g1 = np.linspace(*xi1_range, resolution)
    g2 = np.linspace(*xi2_range, resolution)
    X1, X2 = np.meshgrid(g1, g2, indexing="ij")
    vals = evaluator.averaged_alpha(X1.ravel(), X2.ravel(),
                                    np.full(X1.size, s1), np.full(X1.size, s2))
    return AlphaTable(g1, g2, vals.reshape(resolution, resolution))


def constant_tensor_spec(matrix: np.ndarray) -> TensorSpec:
    return TensorSpec(kind="constant", matrix=tuple(np.asarray(matrix).ravel()))


def solve_averaged(mesh: Mesh, coeffs: CoefficientSet, A_eff1: np.ndarray,
                   A_eff2: np.ndarray, noise: SpectralNoise, dt: float,
                   t_final: float, u0: FieldPair,
                   evaluator: AveragedAlphaEvaluator | None = None,
                   convention: str = "half_q",
                   checkpoint_stride: int = 1) -> Trajectory:
    """Backward-Euler / pointwise-implicit run of the averaged system.

    Same IMEX structure as the epsilon-solver: constant effective tensors,
    with the exchange field bar-alpha(beta u) frozen per step, evaluated with
    the pointwise invariant variances of the noise spectra.
    """
    if evaluator is None:
        evaluator = AveragedAlphaEvaluator(coeffs.alpha)
    X = mesh.coords()
    diff1 = DiffusionSolver(mesh, constant_tensor_spec(A_eff1), dt)
    diff2 = DiffusionSolver(mesh, constant_tensor_spec(A_eff2), dt)
    zero = ScalarField(mesh, np.zeros(mesh.ndof))
    marg = invariant_marginal(FieldPair(zero, zero.copy()), noise, convention)
    s1, s2 = marg.s1, marg.s2

    u1 = u0.f1.values.copy()
    u2 = u0.f2.values.copy()
    n_steps = int(round(t_final / dt))
    if abs(n_steps * dt - t_final) > 1e-9:
        raise ValueError("t_final must be an integer number of steps")

    cp_times = [0.0]
    cp_u1, cp_u2 = [u1.copy()], [u2.copy()]
    sup_l2 = [l2_norm(ScalarField(mesh, u1)), l2_norm(ScalarField(mesh, u2))]
    grad_energy = [0.0, 0.0]
    dudt_energy = [0.0, 0.0]

    for n in range(n_steps):
        t1 = (n + 1) * dt
        xi1, xi2 = coeffs.xi_fields(u1, u2)
        abar = evaluator.averaged_alpha(xi1, xi2, s1, s2)
        star1 = diff1.solve(u1)
        star2 = diff2.solve(u2)
        f1 = eval_forcing(coeffs.f1, t1, X)
        f2 = eval_forcing(coeffs.f2, t1, X)
        new1, new2 = exchange_solve(star1, star2, abar, dt, f1, f2)
        if np.isnan(new1).any() or np.isnan(new2).any():
            raise SolverError("NaN detected in averaged fields", step=n)
        for i, (new, old) in enumerate(((new1, u1), (new2, u2))):
            fld = ScalarField(mesh, new)
            sup_l2[i] = max(sup_l2[i], l2_norm(fld))
            grad_energy[i] += dt * h1_seminorm(fld) ** 2
            dudt_energy[i] += dt * l2_norm(ScalarField(mesh, (new - old) / dt)) ** 2
        u1, u2 = new1, new2
        if (n + 1) % checkpoint_stride == 0 or n + 1 == n_steps:
            cp_times.append(t1)
            cp_u1.append(u1.copy())
            cp_u2.append(u2.copy())

    diagnostics = {
        "sup_l2_u1": sup_l2[0], "sup_l2_u2": sup_l2[1],
        "grad_energy_u1": grad_energy[0], "grad_energy_u2": grad_energy[1],
        "dudt_energy_u1": dudt_energy[0], "dudt_energy_u2": dudt_energy[1],
    }
    return Trajectory(mesh=mesh, times=np.asarray(cp_times),
                      u1=np.asarray(cp_u1), u2=np.asarray(cp_u2),
                      v1=None, v2=None, dt=dt, epsilon=None,
                      diagnostics=diagnostics)
