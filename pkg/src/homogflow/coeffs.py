"""Microscale coefficient families: diffusion tensors, exchange coefficient, forcing.

All families form a closed sub-language with analytically known ellipticity,
bound, and Lipschitz constants, so downstream ergodic-rate and averaging tests
can use exact constants instead of estimates.  Periodic dependence on the cell
variable y is always through trigonometric polynomials; evaluation canonicalizes
y to [0, 1) so periodicity holds exactly in floating point.
"""

from dataclasses import dataclass, field
import numpy as np

TWO_PI = 2.0 * np.pi


class CoefficientError(ValueError):
    """A coefficient family violates one of its declared invariants."""


def wrap_unit_cell(y: np.ndarray) -> np.ndarray:
    """Map coordinates to the half-open unit cell [0, 1)^d (1.0 wraps to 0.0)."""
    return y - np.floor(y)


def _check_in_cell(y: np.ndarray) -> None:
    if np.any(y < 0.0) or np.any(y > 1.0):
        raise CoefficientError("evaluation point outside the closed unit cell")


# ---------------------------------------------------------------------------
# Diffusion tensors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TensorSpec:
    """Periodic tensor field A(y) on the unit cell.

    kind:
      identity    A = I
      constant    A = matrix (entries given row-major)
      scalar_sin  A = (base + amplitude sin(2 pi freq y1)) I
      laminate    A = diag(a(y1), a(y1)), a = base + amplitude sin(2 pi freq y1)
      sin2d       A = (base + amplitude sin(2 pi freq y1) cos(2 pi freq y2)) I
      nonsym      A = [[a(y1), skew], [-skew, a(y2)]], a as in scalar_sin
    """

    kind: str = "identity"
    base: float = 1.0
    amplitude: float = 0.0
    frequency: int = 1
    matrix: tuple = ()
    skew: float = 0.0

    def __post_init__(self):
        if self.kind not in ("identity", "constant", "scalar_sin", "laminate",
                             "sin2d", "nonsym"):
            raise CoefficientError(f"unknown tensor kind {self.kind!r}")
        if self.kind == "constant" and not self.matrix:
            raise CoefficientError("constant tensor needs matrix entries")
        m, _ = self.ellipticity()
        if m <= 0.0:
            raise CoefficientError(f"tensor family {self.kind!r} is not elliptic")

    @property
    def symmetric(self) -> bool:
        if self.kind == "nonsym":
            return self.skew == 0.0
        if self.kind == "constant":
            a = self._constant_matrix()
            return bool(np.allclose(a, a.T))
        return True

    def _constant_matrix(self) -> np.ndarray:
        a = np.asarray(self.matrix, dtype=float)
        d = int(round(np.sqrt(a.size)))
        return a.reshape(d, d)

    def _profile(self, y1: np.ndarray) -> np.ndarray:
        return self.base + self.amplitude * np.sin(TWO_PI * self.frequency * y1)

    def ellipticity(self) -> tuple:
        """Analytic bounds (m, M) on the symmetric-part Rayleigh quotient."""
        if self.kind == "identity":
            return 1.0, 1.0
        if self.kind == "constant":
            a = self._constant_matrix()
            ev = np.linalg.eigvalsh(0.5 * (a + a.T))
            return float(ev.min()), float(ev.max())
        lo = self.base - abs(self.amplitude)
        hi = self.base + abs(self.amplitude)
        return lo, hi

    def transpose(self) -> "TensorSpec":
        if self.kind == "constant":
            return TensorSpec(kind="constant",
                              matrix=tuple(self._constant_matrix().T.ravel()))
        if self.kind == "nonsym":
            return TensorSpec(kind="nonsym", base=self.base,
                              amplitude=self.amplitude,
                              frequency=self.frequency, skew=-self.skew)
        return self


def eval_tensor_many(spec: TensorSpec, points: np.ndarray) -> np.ndarray:
    """Evaluate A at points (npts, d) after periodic wrap; returns (npts, d, d)."""
    pts = wrap_unit_cell(np.atleast_2d(np.asarray(points, dtype=float)))
    npts, d = pts.shape
    out = np.zeros((npts, d, d))
    if spec.kind == "identity":
        out[:, range(d), range(d)] = 1.0
    elif spec.kind == "constant":
        a = spec._constant_matrix()
        if a.shape[0] != d:
            raise CoefficientError("constant tensor dimension mismatch")
        out[:] = a
    elif spec.kind == "scalar_sin":
        a = spec._profile(pts[:, 0])
        out[:, range(d), range(d)] = a[:, None]
    elif spec.kind == "laminate":
        if d != 2:
            raise CoefficientError("laminate tensor is two-dimensional")
        a = spec._profile(pts[:, 0])
        out[:, 0, 0] = a
        out[:, 1, 1] = a
    elif spec.kind == "sin2d":
        if d != 2:
            raise CoefficientError("sin2d tensor is two-dimensional")
        a = (spec.base + spec.amplitude
             * np.sin(TWO_PI * spec.frequency * pts[:, 0])
             * np.cos(TWO_PI * spec.frequency * pts[:, 1]))
        out[:, 0, 0] = a
        out[:, 1, 1] = a
    elif spec.kind == "nonsym":
        if d != 2:
            raise CoefficientError("nonsym tensor is two-dimensional")
        out[:, 0, 0] = spec._profile(pts[:, 0])
        out[:, 1, 1] = spec._profile(pts[:, 1])
        out[:, 0, 1] = spec.skew
        out[:, 1, 0] = -spec.skew
    return out


def eval_tensor(spec: TensorSpec, y) -> np.ndarray:
    """A(y) as a d x d matrix; y must lie in the closed unit cell."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    _check_in_cell(y)
    return eval_tensor_many(spec, y[None, :])[0]


# ---------------------------------------------------------------------------
# Exchange coefficient alpha(y, eta1, eta2)
# ---------------------------------------------------------------------------

_SATURATIONS = ("one", "tanh_eta1", "tanh_mix", "sin_eta1")


@dataclass(frozen=True)
class AlphaSpec:
    """Exchange coefficient from the closed family

      constant      alpha = c0
      separable     alpha = (c0 + c1 sin(2 pi k y1)) * s(eta1, eta2)
      smooth_mixed  alpha = c0 + c1 p(y1) * s(eta1, eta2)

    with p(y1) = sin(2 pi k y1) (y_shape "sin") or sin^2(2 pi k y1) ("sin_sq"),
    and saturation s one of: one, tanh_eta1 = tanh(eta1),
    tanh_mix = (1 + tanh(w1 eta1 + w2 eta2))/2, sin_eta1 = sin(eta1).

    The bound and Lipschitz constant in (eta1, eta2) are exact by construction.
    """

    kind: str = "constant"
    c0: float = 1.0
    c1: float = 0.0
    y_frequency: int = 1
    y_shape: str = "sin"
    saturation: str = "one"
    w1: float = 1.0
    w2: float = 0.0
    nonneg: bool = field(default=False)

    def __post_init__(self):
        if self.kind not in ("constant", "separable", "smooth_mixed"):
            raise CoefficientError(f"unknown alpha kind {self.kind!r}")
        if self.saturation not in _SATURATIONS:
            raise CoefficientError(f"unknown saturation {self.saturation!r}")
        if self.y_shape not in ("sin", "sin_sq"):
            raise CoefficientError(f"unknown y_shape {self.y_shape!r}")
        if self.nonneg and not self._nonneg_guaranteed():
            raise CoefficientError(
                "nonneg flag set but the family cannot guarantee alpha >= 0")

    # -- saturation helpers -------------------------------------------------

    def _sat(self, eta1, eta2):
        if self.saturation == "one":
            return np.ones_like(np.asarray(eta1, dtype=float))
        if self.saturation == "tanh_eta1":
            return np.tanh(eta1)
        if self.saturation == "tanh_mix":
            return 0.5 * (1.0 + np.tanh(self.w1 * eta1 + self.w2 * eta2))
        return np.sin(eta1)

    def _sat_bound_lip(self) -> tuple:
        if self.saturation == "one":
            return 1.0, 0.0
        if self.saturation == "tanh_mix":
            return 1.0, 0.5 * float(np.hypot(self.w1, self.w2))
        return 1.0, 1.0  # tanh_eta1, sin_eta1

    def _sat_nonneg(self) -> bool:
        return self.saturation in ("one", "tanh_mix")

    def _y_part(self, y1):
        """Spatial modulation g(y1) (separable) or p(y1) (smooth_mixed)."""
        s = np.sin(TWO_PI * self.y_frequency * np.asarray(y1, dtype=float))
        if self.y_shape == "sin_sq":
            s = s * s
        if self.kind == "separable":
            return self.c0 + self.c1 * s
        return s

    def _nonneg_guaranteed(self) -> bool:
        s_max, _ = self._sat_bound_lip()
        if self.kind == "constant":
            return self.c0 >= 0.0
        if self.kind == "separable":
            g_min = self.c0 - abs(self.c1) if self.y_shape == "sin" \
                else min(self.c0, self.c0 + self.c1)
            return g_min >= 0.0 and self._sat_nonneg()
        return self.c0 - abs(self.c1) * s_max >= 0.0

    # -- declared constants --------------------------------------------------

    @property
    def bound(self) -> float:
        """Exact sup |alpha| over y and (eta1, eta2)."""
        s_max, _ = self._sat_bound_lip()
        if self.kind == "constant":
            return abs(self.c0)
        if self.kind == "separable":
            g_max = abs(self.c0) + abs(self.c1)
            return g_max * s_max
        return abs(self.c0) + abs(self.c1) * s_max

    @property
    def lip(self) -> float:
        """Exact Lipschitz constant of alpha(y, ., .) uniform in y."""
        _, s_lip = self._sat_bound_lip()
        if self.kind == "constant":
            return 0.0
        if self.kind == "separable":
            return (abs(self.c0) + abs(self.c1)) * s_lip
        return abs(self.c1) * s_lip


def eval_alpha_many(spec: AlphaSpec, points: np.ndarray,
                    eta1, eta2) -> np.ndarray:
    """alpha at wrapped points (npts, d) with nodal eta arrays broadcast."""
    pts = wrap_unit_cell(np.atleast_2d(np.asarray(points, dtype=float)))
    if spec.kind == "constant":
        shape = np.broadcast(pts[:, 0], np.asarray(eta1)).shape
        return np.full(shape, spec.c0)
    y_part = spec._y_part(pts[:, 0])
    s = spec._sat(eta1, eta2)
    if spec.kind == "separable":
        return y_part * s
    return spec.c0 + spec.c1 * y_part * s


def eval_alpha(spec: AlphaSpec, y, eta1: float, eta2: float) -> float:
    """alpha(y, eta1, eta2); y must lie in the closed unit cell."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    _check_in_cell(y)
    return float(eval_alpha_many(spec, y[None, :], eta1, eta2)[0])


def alpha_y_average_coefficients(spec: AlphaSpec, n_y: int = 64) -> tuple:
    """Coefficients (a0, a1) with  int_Y alpha(y, e) dy = a0 + a1 s(e).

    The y-integral is taken by midpoint quadrature with n_y points, which is
    exact (to roundoff) for the trigonometric modulations of this family.
    """
    mid = (np.arange(n_y) + 0.5) / n_y
    if spec.kind == "constant":
        return spec.c0, 0.0
    g = spec._y_part(mid)
    if spec.kind == "separable":
        return 0.0, float(np.mean(g))
    return spec.c0, spec.c1 * float(np.mean(g))


def alpha_pointwise_coefficients(spec: AlphaSpec, points: np.ndarray) -> tuple:
    """Arrays (a0, a1) with  alpha(y_i, e) = a0_i + a1_i s(e)  at given points."""
    pts = wrap_unit_cell(np.atleast_2d(np.asarray(points, dtype=float)))
    npts = pts.shape[0]
    if spec.kind == "constant":
        return np.full(npts, spec.c0), np.zeros(npts)
    g = spec._y_part(pts[:, 0])
    if spec.kind == "separable":
        return np.zeros(npts), g
    return np.full(npts, spec.c0), spec.c1 * g


# ---------------------------------------------------------------------------
# Forcing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ForcingSpec:
    """Space-time forcing f(t, x) on [0, T] x D.

    kind "zero"; "sine_decay": amplitude * prod_i sin(mode pi x_i) * exp(-rate t);
    "bump": amplitude * prod_i 16 x_i^2 (1 - x_i)^2 (steady).
    """

    kind: str = "zero"
    amplitude: float = 0.0
    mode: int = 1
    rate: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "sine_decay", "bump"):
            raise CoefficientError(f"unknown forcing kind {self.kind!r}")


def eval_forcing(spec: ForcingSpec, t: float, points: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if spec.kind == "zero":
        return np.zeros(pts.shape[0])
    if spec.kind == "sine_decay":
        v = spec.amplitude * np.exp(-spec.rate * t) * np.ones(pts.shape[0])
        for i in range(pts.shape[1]):
            v = v * np.sin(spec.mode * np.pi * pts[:, i])
        return v
    v = spec.amplitude * np.ones(pts.shape[0])
    for i in range(pts.shape[1]):
        xi = pts[:, i]
        v = v * 16.0 * xi * xi * (1.0 - xi) * (1.0 - xi)
    return v


# ---------------------------------------------------------------------------
# The full coefficient set and its validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientSet:
    """All microscale data for one experiment: A1, A2, alpha, f1, f2, beta."""

    A1: TensorSpec
    A2: TensorSpec
    alpha: AlphaSpec
    f1: ForcingSpec = ForcingSpec()
    f2: ForcingSpec = ForcingSpec()
    beta: tuple = ((1.0, 0.0), (0.0, 1.0))

    def __post_init__(self):
        b = np.asarray(self.beta, dtype=float)
        if b.shape != (2, 2):
            raise CoefficientError("beta must be a 2x2 matrix")

    @property
    def beta_matrix(self) -> np.ndarray:
        return np.asarray(self.beta, dtype=float)

    @property
    def ellipticity(self) -> tuple:
        """(m, M) valid for both tensors."""
        m1, M1 = self.A1.ellipticity()
        m2, M2 = self.A2.ellipticity()
        return min(m1, m2), max(M1, M2)

    @property
    def alpha_bound(self) -> float:
        return self.alpha.bound

    @property
    def alpha_lip(self) -> float:
        return self.alpha.lip

    def xi_fields(self, u1: np.ndarray, u2: np.ndarray) -> tuple:
        """Frozen fast-equation means (xi1, xi2) = (b11 u1 + b12 u2, b21 u1 + b22 u2)."""
        b = self.beta_matrix
        return b[0, 0] * u1 + b[0, 1] * u2, b[1, 0] * u1 + b[1, 1] * u2


@dataclass
class ValidationReport:
    rayleigh_min: float
    rayleigh_max: float
    declared_m: float
    declared_M: float
    alpha_sup: float
    declared_alpha_bound: float
    lip_quotient_max: float
    declared_alpha_lip: float
    periodicity_residual: float
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(cs: CoefficientSet, samples: int = 10_000, dimension: int = 1,
             seed: int = 0) -> ValidationReport:
    """Empirically check ellipticity, bound, Lipschitz, and periodicity.

    Raises CoefficientError when a sampled point violates ellipticity beyond
    1e-12; other violations are collected in the report.
    """
    if samples < 1:
        raise CoefficientError("samples must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    d = dimension
    y = rng.random((samples, d))
    xi = rng.standard_normal((samples, d))
    xi /= np.linalg.norm(xi, axis=1, keepdims=True)

    m_decl, M_decl = cs.ellipticity
    ray_min, ray_max = np.inf, -np.inf
    violations = []
    for spec in (cs.A1, cs.A2):
        a = eval_tensor_many(spec, y)
        quot = np.einsum("ni,nij,nj->n", xi, a, xi)
        ray_min = min(ray_min, float(quot.min()))
        ray_max = max(ray_max, float(quot.max()))
    if ray_min < m_decl - 1e-12 or ray_max > M_decl + 1e-12:
        raise CoefficientError(
            f"ellipticity violated: sampled range [{ray_min}, {ray_max}] "
            f"outside declared [{m_decl}, {M_decl}]")

    eta = 4.0 * rng.standard_normal((samples, 2))
    a_vals = eval_alpha_many(cs.alpha, y, eta[:, 0], eta[:, 1]).ravel()
    alpha_sup = float(np.abs(a_vals).max())
    if alpha_sup > cs.alpha_bound + 1e-12:
        violations.append("alpha bound exceeded")
    if cs.alpha.nonneg and a_vals.min() < 0.0:
        violations.append("nonneg flag violated")

    eta_b = eta + 0.5 * rng.standard_normal((samples, 2))
    va = eval_alpha_many(cs.alpha, y, eta[:, 0], eta[:, 1]).ravel()
    vb = eval_alpha_many(cs.alpha, y, eta_b[:, 0], eta_b[:, 1]).ravel()
    dist = np.linalg.norm(eta - eta_b, axis=1)
    keep = dist > 1e-12
    lip_quot = float(np.max(np.abs(va - vb)[keep] / dist[keep])) if keep.any() else 0.0
    if lip_quot > cs.alpha_lip + 1e-9:
        violations.append("alpha Lipschitz constant exceeded")

    # boundary-paired periodicity: y on a face vs y + e_i on the opposite face
    resid = 0.0
    for i in range(d):
        y0 = rng.random((min(samples, 256), d))
        y0[:, i] = 0.0
        y1 = y0.copy()
        y1[:, i] = 1.0
        for spec in (cs.A1, cs.A2):
            resid = max(resid, float(np.abs(
                eval_tensor_many(spec, y0) - eval_tensor_many(spec, y1)).max()))
        e = rng.standard_normal((y0.shape[0], 2))
        resid = max(resid, float(np.abs(
            eval_alpha_many(cs.alpha, y0, e[:, 0], e[:, 1])
            - eval_alpha_many(cs.alpha, y1, e[:, 0], e[:, 1])).max()))
    if resid != 0.0:
        violations.append("periodicity residual nonzero")

    return ValidationReport(
        rayleigh_min=ray_min, rayleigh_max=ray_max,
        declared_m=m_decl, declared_M=M_decl,
        alpha_sup=alpha_sup, declared_alpha_bound=cs.alpha_bound,
        lip_quotient_max=lip_quot, declared_alpha_lip=cs.alpha_lip,
        periodicity_residual=resid, violations=violations)
