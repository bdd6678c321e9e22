"""Empirical ergodic diagnostics: mixing gaps, window averages, S-splitting.

The mixing estimate and the window-averaging bound involve unobservable
constants, so these diagnostics test shape: exponential decay of the
semigroup gap at the drift rate, and monotone decay of window-average errors
as epsilon shrinks.  Probe functionals come from a closed family with
analytically known Lipschitz constants.  The S1/S2/S3 splitting is evaluated
with one shared quadrature so the algebraic identity
total = S1 + S2 + S3 holds to roundoff.
"""

from dataclasses import dataclass
import numpy as np

from . import coeffs as _coeffs
from .avg import AveragedAlphaEvaluator
from .coeffs import AlphaSpec, CoefficientSet, alpha_y_average_coefficients
from .fastsde import SpectralNoise, _variance_factor, invariant_marginal
from .grid import FieldPair, Mesh, ScalarField
from .slowpde import Trajectory


# ---------------------------------------------------------------------------
# Probe functionals with known Lipschitz constants
# ---------------------------------------------------------------------------

@dataclass
class LinearProbe:
    """Phi(v) = clip(<v1, w1> + <v2, w2>); Lipschitz constant ||w|| exactly."""

    w1: np.ndarray
    w2: np.ndarray
    mesh: Mesh
    clip: float | None = None

    @property
    def lipschitz(self) -> float:
        hd = self.mesh.h ** self.mesh.dimension
        return float(np.sqrt(hd * (np.dot(self.w1, self.w1)
                                   + np.dot(self.w2, self.w2))))

    def evaluate(self, v1: np.ndarray, v2: np.ndarray) -> np.ndarray:
        hd = self.mesh.h ** self.mesh.dimension
        vals = hd * (np.atleast_2d(v1) @ self.w1 + np.atleast_2d(v2) @ self.w2)
        if self.clip is not None:
            vals = np.clip(vals, -self.clip, self.clip)
        return vals

    def invariant_mean(self, xi1: np.ndarray, xi2: np.ndarray,
                       noise: SpectralNoise, convention: str = "half_q") -> float:
        hd = self.mesh.h ** self.mesh.dimension
        mean = float(hd * (np.dot(xi1, self.w1) + np.dot(xi2, self.w2)))
        if self.clip is None:
            return mean
        fac = _variance_factor(convention)
        w1_k = noise.project(self.w1)
        w2_k = noise.project(self.w2)
        var = float(fac * (noise.lam1 @ w1_k ** 2 + noise.lam2 @ w2_k ** 2))
        t, w = np.polynomial.hermite.hermgauss(40)
        z = mean + np.sqrt(2.0 * var) * t
        return float(np.clip(z, -self.clip, self.clip) @ w / np.sqrt(np.pi))


@dataclass
class ExchangeProbe:
    """Phi(v) = int_D (int_Y alpha(y, v(x)) dy) phi(x) dx, the averaged
    composition functional; Lipschitz constant lip(alpha_ybar) ||phi||."""

    alpha: AlphaSpec
    weight: np.ndarray
    mesh: Mesh
    gh_order: int = 20

    def __post_init__(self):
        self._a0, self._a1 = alpha_y_average_coefficients(self.alpha)
        self._evaluator = AveragedAlphaEvaluator(self.alpha, self.gh_order)

    @property
    def lipschitz(self) -> float:
        hd = self.mesh.h ** self.mesh.dimension
        _, s_lip = self.alpha._sat_bound_lip()
        wnorm = float(np.sqrt(hd * np.dot(self.weight, self.weight)))
        return abs(self._a1) * s_lip * wnorm

    def evaluate(self, v1: np.ndarray, v2: np.ndarray) -> np.ndarray:
        hd = self.mesh.h ** self.mesh.dimension
        vals = self._a0 + self._a1 * self.alpha._sat(np.atleast_2d(v1),
                                                     np.atleast_2d(v2))
        return hd * (vals @ self.weight)

    def invariant_mean(self, xi1: np.ndarray, xi2: np.ndarray,
                       noise: SpectralNoise, convention: str = "half_q") -> float:
        mesh = noise.mesh
        zero = ScalarField(mesh, np.zeros(mesh.ndof))
        marg = invariant_marginal(FieldPair(zero, zero.copy()), noise, convention)
        abar = self._evaluator.averaged_alpha(xi1, xi2, marg.s1, marg.s2)
        hd = mesh.h ** mesh.dimension
        return float(hd * np.dot(abar, self.weight))


# ---------------------------------------------------------------------------
# Mixing estimate
# ---------------------------------------------------------------------------

@dataclass
class GapEstimate:
    t: float
    gap: float
    half_width: float


@dataclass
class MixingReport:
    """Semigroup gaps |P_t Phi(eta) - mu(Phi)| over a time grid with a fit."""

    probe_times: np.ndarray
    gaps: np.ndarray
    half_widths: np.ndarray
    fitted_rate: float
    fitted_prefactor: float
    bound_constant: float       # smallest c with gap <= c [Phi] e^-t (1+|eta|+|xi|)


def _exact_time_t_sample(eta_k: np.ndarray, xi_k: np.ndarray, lam: np.ndarray,
                         t: float, replicas: int, rng) -> np.ndarray:
    """Draws of the coefficient vector at time t (unit-rate dynamics, frozen xi)."""
    rho = np.exp(-t)
    scale = np.sqrt(0.5 * lam * (1.0 - rho * rho))
    g = rng.standard_normal((replicas, lam.size))
    return xi_k + (eta_k - xi_k) * rho + scale * g


def mixing_gap(probe, xi: FieldPair, eta: FieldPair, t: float, replicas: int,
               noise: SpectralNoise, rng,
               convention: str = "half_q") -> GapEstimate:
    """Monte Carlo estimate of |E Phi(v(t)) - mu^xi(Phi)| with a CLT half-width.

    The time-t marginal is sampled exactly (the stepper's law applied once),
    so the estimate carries pure replica noise.
    """
    if replicas < 100:
        raise ValueError("mixing gap needs at least 10^2 replicas")
    eta1_k = noise.project(eta.f1.values)
    eta2_k = noise.project(eta.f2.values)
    xi1_k = noise.project(xi.f1.values)
    xi2_k = noise.project(xi.f2.values)
    c1 = _exact_time_t_sample(eta1_k, xi1_k, noise.lam1, t, replicas, rng)
    c2 = _exact_time_t_sample(eta2_k, xi2_k, noise.lam2, t, replicas, rng)
    v1 = noise.synthesize(c1)
    v2 = noise.synthesize(c2)
    vals = probe.evaluate(v1, v2).ravel()
    mu_phi = probe.invariant_mean(xi.f1.values, xi.f2.values, noise, convention)
    gap = abs(float(vals.mean()) - mu_phi)
    half = float(vals.std(ddof=1) / np.sqrt(replicas))
    return GapEstimate(t=t, gap=gap, half_width=half)


def mixing_report(probe, xi: FieldPair, eta: FieldPair, times, replicas: int,
                  noise: SpectralNoise, rng,
                  convention: str = "half_q") -> MixingReport:
    times = np.asarray(times, dtype=float)
    gaps = np.empty(times.size)
    halves = np.empty(times.size)
    for i, t in enumerate(times):
        est = mixing_gap(probe, xi, eta, float(t), replicas, noise, rng,
                         convention)
        gaps[i] = est.gap
        halves[i] = est.half_width
    usable = gaps > 3.0 * halves
    if usable.sum() >= 2:
        coeff = np.polyfit(times[usable], np.log(gaps[usable]), 1)
        rate, prefactor = -float(coeff[0]), float(np.exp(coeff[1]))
    else:
        rate, prefactor = float("nan"), float("nan")
    size = 1.0 + _pair_l2(eta, noise.mesh) + _pair_l2(xi, noise.mesh)
    lip = probe.lipschitz
    bound_c = float(np.max(gaps * np.exp(times) / (lip * size))) if lip > 0 \
        else 0.0
    return MixingReport(probe_times=times, gaps=gaps, half_widths=halves,
                        fitted_rate=rate, fitted_prefactor=prefactor,
                        bound_constant=bound_c)


def _pair_l2(pair: FieldPair, mesh: Mesh) -> float:
    hd = mesh.h ** mesh.dimension
    return float(np.sqrt(hd * (np.dot(pair.f1.values, pair.f1.values)
                               + np.dot(pair.f2.values, pair.f2.values))))


# ---------------------------------------------------------------------------
# Window averaging (tested in shape: errors shrink as epsilon does)
# ---------------------------------------------------------------------------

def window_average_error(probe, traj: Trajectory, t0: float, delta: float,
                         coeffs: CoefficientSet, noise: SpectralNoise,
                         rng=None, convention: str = "half_q",
                         mode: str = "frozen") -> float:
    """| (1/delta) int_(t0, t0+delta) Phi(v(s)) ds  -  mu^xi(Phi) |.

    xi is frozen at beta u(t0).  In "frozen" mode the fast pair restarts from
    eta = v(t0) and evolves over the window with that frozen xi (the
    piecewise-freezing construction behind the averaging argument), consuming
    increments from rng; "coupled" mode averages the recorded fast fields
    instead, which also carries the slow drift.  Stride-1 checkpoints are
    required either way.
    """
    times = traj.times
    if traj.v1 is None:
        raise ValueError("trajectory carries no fast-field checkpoints")
    if t0 < times[0] - 1e-12 or t0 + delta > times[-1] + 1e-12:
        raise ValueError("window exceeds the recorded trajectory")
    if delta <= 0.0:
        raise ValueError("window length must be positive")
    if mode not in ("frozen", "coupled"):
        raise ValueError(f"unknown window mode {mode!r}")
    i0 = int(np.argmin(np.abs(times - t0)))
    xi1, xi2 = coeffs.xi_fields(traj.u1[i0], traj.u2[i0])
    mu_phi = probe.invariant_mean(xi1, xi2, noise, convention)

    if mode == "coupled":
        in_window = (times > times[i0] + 1e-12) \
            & (times <= times[i0] + delta + 1e-12)
        idx = np.nonzero(in_window)[0]
        if idx.size == 0:
            raise ValueError("window contains no checkpoints")
        vals = probe.evaluate(traj.v1[idx], traj.v2[idx]).ravel()
        return abs(float(vals.mean()) - mu_phi)

    if rng is None:
        raise ValueError("frozen-window evaluation needs an rng")
    if traj.epsilon is None:
        raise ValueError("trajectory must come from an epsilon run")
    dt = traj.dt
    n_sub = int(round(delta / dt))
    if n_sub < 1:
        raise ValueError("window shorter than one step")
    rho = np.exp(-dt / traj.epsilon)
    fac = 1.0 - rho * rho
    s1 = np.sqrt(0.5 * noise.lam1 * fac)
    s2 = np.sqrt(0.5 * noise.lam2 * fac)
    xi1_k = noise.project(xi1)
    xi2_k = noise.project(xi2)
    c1 = noise.project(traj.v1[i0])
    c2 = noise.project(traj.v2[i0])
    acc = 0.0
    for _ in range(n_sub):
        c1 = xi1_k + (c1 - xi1_k) * rho + s1 * rng.standard_normal(c1.size)
        c2 = xi2_k + (c2 - xi2_k) * rho + s2 * rng.standard_normal(c2.size)
        acc += float(probe.evaluate(noise.synthesize(c1),
                                    noise.synthesize(c2)).ravel()[0])
    return abs(acc / n_sub - mu_phi)


# ---------------------------------------------------------------------------
# S-decomposition of the limit defect
# ---------------------------------------------------------------------------

@dataclass
class SDecomposition:
    """The three-way splitting of the exchange-term defect and its total."""

    s1: float
    s2: float
    s3: float
    total_direct: float

    @property
    def total(self) -> float:
        return self.s1 + self.s2 + self.s3


def s_decomposition(eps_traj: Trajectory, avg_traj: Trajectory,
                    coeffs: CoefficientSet, noise: SpectralNoise,
                    phi: np.ndarray, psi: np.ndarray,
                    evaluator: AveragedAlphaEvaluator | None = None,
                    convention: str = "half_q",
                    time_stride: int = 1) -> SDecomposition:
    """Quadrature of the S1 / S2 / S3 integrals on the shared (mesh, time) grid.

    S1 pits the realized exchange field against its invariant average at the
    epsilon-run arguments; S2 moves the arguments to the averaged run; S3 swaps
    the y-pointwise average for the full cell average.  All three use one
    quadrature so their sum equals the directly evaluated total defect.
    """
    mesh = eps_traj.mesh
    if mesh != avg_traj.mesh:
        raise ValueError("runs must share one mesh")
    if eps_traj.times.size != avg_traj.times.size or \
            np.max(np.abs(eps_traj.times - avg_traj.times)) > 1e-12:
        raise ValueError("runs must share the time grid")
    if eps_traj.epsilon is None or eps_traj.v1 is None:
        raise ValueError("first argument must be an epsilon-run trajectory")
    if evaluator is None:
        evaluator = AveragedAlphaEvaluator(coeffs.alpha)
    eps = eps_traj.epsilon
    X = mesh.coords()
    Y = _coeffs.wrap_unit_cell(X / eps)
    hd = mesh.h ** mesh.dimension
    zero = ScalarField(mesh, np.zeros(mesh.ndof))
    marg = invariant_marginal(FieldPair(zero, zero.copy()), noise, convention)

    sel = np.arange(0, eps_traj.times.size, time_stride)
    if sel[-1] != eps_traj.times.size - 1:
        sel = np.append(sel, eps_traj.times.size - 1)
    times = eps_traj.times[sel]
    psi = np.asarray(psi, dtype=float)[sel]

    i1 = np.empty(sel.size)
    i2 = np.empty(sel.size)
    i3 = np.empty(sel.size)
    direct = np.empty(sel.size)
    for out_idx, n in enumerate(sel):
        v1, v2 = eps_traj.v1[n], eps_traj.v2[n]
        ue1, ue2 = eps_traj.u1[n], eps_traj.u2[n]
        ub1, ub2 = avg_traj.u1[n], avg_traj.u2[n]
        xi_e1, xi_e2 = coeffs.xi_fields(ue1, ue2)
        xi_b1, xi_b2 = coeffs.xi_fields(ub1, ub2)
        alpha_eps = _coeffs.eval_alpha_many(coeffs.alpha, Y, v1, v2)
        abar_eps_e = evaluator.averaged_alpha_pointwise(Y, xi_e1, xi_e2,
                                                        marg.s1, marg.s2)
        abar_eps_b = evaluator.averaged_alpha_pointwise(Y, xi_b1, xi_b2,
                                                        marg.s1, marg.s2)
        abar_b = evaluator.averaged_alpha(xi_b1, xi_b2, marg.s1, marg.s2)
        du_e = ue2 - ue1
        du_b = ub2 - ub1
        i1[out_idx] = hd * np.dot((alpha_eps - abar_eps_e) * du_e, phi)
        i2[out_idx] = hd * np.dot(abar_eps_e * du_e - abar_eps_b * du_b, phi)
        i3[out_idx] = hd * np.dot((abar_eps_b - abar_b) * du_b, phi)
        direct[out_idx] = hd * np.dot(alpha_eps * du_e - abar_b * du_b, phi)

    def integrate(vals):
        return float(np.trapezoid(psi * vals, times))

    return SDecomposition(s1=integrate(i1), s2=integrate(i2), s3=integrate(i3),
                          total_direct=integrate(direct))
