"""Experiment orchestration: config parsing, convergence studies, reports.

A study is declared in a TOML file and runs the full pipeline: cell problems
once, the averaged system once, then one epsilon-run per (epsilon, replica)
with seeds derived statelessly from (base seed, role, replica), so repeated
studies are byte-identical.  Convergence in probability is judged on replica
medians (midpoint convention) of the sup-t L2 error and of weak-H1 functional
errors against a fixed panel of smooth test fields, with and without
corrector augmentation.
"""

from dataclasses import dataclass, field
import csv
import os

import numpy as np

from .avg import AveragedAlphaEvaluator, solve_averaged
from .cell import corrector_test_function, solve_cell
from .coeffs import (AlphaSpec, CoefficientError, CoefficientSet, ForcingSpec,
                     TensorSpec)
from .fastsde import SpectralNoise, make_spectral_noise
from .grid import (DIRICHLET, PERIODIC, FieldPair, Mesh, ScalarField,
                   SmoothField, _face_difference_ops)
from .seeding import derive_seed, make_rng
from .slowpde import EpsilonRunConfig, Trajectory, simulate
from .ergodic import ExchangeProbe, LinearProbe, s_decomposition


class ConfigError(ValueError):
    """The experiment configuration is malformed or inconsistent."""


STUDY_KINDS = ("cell", "simulate", "average", "ergodic", "converge", "validate")

CONVERGENCE_COLUMNS = ("epsilon", "replica", "sup_l2_err_u1", "sup_l2_err_u2",
                       "weak_h1_err_u1", "weak_h1_err_u2")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """Everything needed to reconstruct a study run."""

    study: str
    mesh: Mesh
    cell_n: int
    t_final: float
    dt: float
    epsilons: tuple
    replicas: int
    coeffs: CoefficientSet
    noise_params: dict
    initial: dict
    base_seed: int
    out_dir: str
    checkpoint_stride: int = 1
    gh_order: int = 20
    n_y: int = 64
    invariant_covariance: str = "half_q"
    jobs: int = 1
    svg: bool = False
    sdecomp: bool = True
    sdecomp_stride: int = 4
    ergodic_params: dict = field(default_factory=dict)
    average_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.study not in STUDY_KINDS:
            raise ConfigError(f"unknown study kind {self.study!r}")
        eps = tuple(float(e) for e in self.epsilons)
        if eps and any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("epsilon list must be strictly decreasing")
        if self.replicas < 1:
            raise ConfigError("replica count must be >= 1")
        self.epsilons = eps

    def build_noise(self) -> SpectralNoise:
        p = self.noise_params
        return make_spectral_noise(self.mesh,
                                   truncation=int(p.get("truncation", 32)),
                                   decay=p.get("decay"),
                                   sigma1=float(p.get("sigma1", 1.0)),
                                   sigma2=float(p.get("sigma2", 1.0)))

    def initial_fields(self) -> FieldPair:
        return FieldPair(_named_field(self.mesh, self.initial.get("u1", "zero")),
                         _named_field(self.mesh, self.initial.get("u2", "zero")))


def _named_field(mesh: Mesh, spec) -> ScalarField:
    """Initial-field sub-language: zero | sine | bump with amplitude/mode."""
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind", "zero")
    amp = float(spec.get("amplitude", 1.0))
    mode = int(spec.get("mode", 1))
    X = mesh.coords()
    if kind == "zero":
        return ScalarField(mesh, np.zeros(mesh.ndof))
    if kind == "sine":
        return ScalarField(mesh, amp * SmoothField("sine", mode).values(X))
    if kind == "bump":
        return ScalarField(mesh, amp * SmoothField("poly").values(X))
    raise ConfigError(f"unknown initial field kind {kind!r}")


def initial_fast_fields(config: "ExperimentConfig", noise: SpectralNoise,
                        u0: FieldPair, replica: int) -> FieldPair | None:
    """Fast-pair start: zero fields (default) or a draw from the invariant
    measure at xi = beta u0, on its own deterministic RNG stream."""
    kind = config.initial.get("v", "zero")
    if kind == "zero":
        return None
    if kind != "invariant":
        raise ConfigError(f"unknown initial fast-field kind {kind!r}")
    from .fastsde import invariant_marginal, sample_invariant
    xi1, xi2 = config.coeffs.xi_fields(u0.f1.values, u0.f2.values)
    marg = invariant_marginal(
        FieldPair(ScalarField(config.mesh, xi1), ScalarField(config.mesh, xi2)),
        noise, config.invariant_covariance)
    rng = make_rng(derive_seed(config.base_seed, "V0", replica))
    return sample_invariant(marg, rng)


def _tensor_from_table(tab: dict) -> TensorSpec:
    try:
        return TensorSpec(kind=tab.get("kind", "identity"),
                          base=float(tab.get("base", 1.0)),
                          amplitude=float(tab.get("amplitude", 0.0)),
                          frequency=int(tab.get("frequency", 1)),
                          matrix=tuple(np.asarray(tab["matrix"], dtype=float).ravel())
                          if "matrix" in tab else (),
                          skew=float(tab.get("skew", 0.0)))
    except CoefficientError as exc:
        raise ConfigError(str(exc)) from exc


def _alpha_from_table(tab: dict) -> AlphaSpec:
    try:
        return AlphaSpec(kind=tab.get("kind", "constant"),
                         c0=float(tab.get("c0", 1.0)),
                         c1=float(tab.get("c1", 0.0)),
                         y_frequency=int(tab.get("y_frequency", 1)),
                         y_shape=tab.get("y_shape", "sin"),
                         saturation=tab.get("saturation", "one"),
                         w1=float(tab.get("w1", 1.0)),
                         w2=float(tab.get("w2", 0.0)),
                         nonneg=bool(tab.get("nonneg", False)))
    except CoefficientError as exc:
        raise ConfigError(str(exc)) from exc


def _forcing_from_table(tab: dict) -> ForcingSpec:
    try:
        return ForcingSpec(kind=tab.get("kind", "zero"),
                           amplitude=float(tab.get("amplitude", 0.0)),
                           mode=int(tab.get("mode", 1)),
                           rate=float(tab.get("rate", 0.0)))
    except CoefficientError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(table: dict, out_dir: str | None = None,
                 seed: int | None = None, jobs: int | None = None) -> ExperimentConfig:
    """Build an ExperimentConfig from a parsed TOML table."""
    try:
        mesh_tab = table.get("mesh", {})
        mesh = Mesh(int(mesh_tab.get("dimension", 1)),
                    int(mesh_tab.get("n", 64)), DIRICHLET)
        time_tab = table.get("time", {})
        coeff_tab = table.get("coefficients", {})
        cs = CoefficientSet(
            A1=_tensor_from_table(coeff_tab.get("A1", {})),
            A2=_tensor_from_table(coeff_tab.get("A2", {})),
            alpha=_alpha_from_table(coeff_tab.get("alpha", {})),
            f1=_forcing_from_table(coeff_tab.get("f1", {})),
            f2=_forcing_from_table(coeff_tab.get("f2", {})),
            beta=tuple(tuple(float(x) for x in row)
                       for row in coeff_tab.get("beta",
                                                [[1.0, 0.0], [0.0, 1.0]])))
        quad = table.get("quadrature", {})
        out = out_dir if out_dir is not None else \
            table.get("output", {}).get("directory", "out")
        return ExperimentConfig(
            study=table.get("study", "converge"),
            mesh=mesh,
            cell_n=int(mesh_tab.get("cell_n", 256 if mesh.dimension == 1 else 64)),
            t_final=float(time_tab.get("T", 0.5)),
            dt=float(time_tab.get("dt", time_tab.get("T", 0.5) / 256.0)),
            epsilons=tuple(table.get("epsilon", {}).get("values", [0.25])),
            replicas=int(table.get("replicas", {}).get("count", 1)),
            coeffs=cs,
            noise_params=dict(table.get("noise", {})),
            initial=dict(table.get("initial", {})),
            base_seed=int(seed if seed is not None else table.get("seed", 0)),
            out_dir=out,
            checkpoint_stride=int(time_tab.get("checkpoint_stride", 1)),
            gh_order=int(quad.get("gauss_hermite", 20)),
            n_y=int(quad.get("n_y", 64)),
            invariant_covariance=table.get("noise", {}).get(
                "invariant_covariance", "half_q"),
            jobs=int(jobs if jobs is not None else table.get("jobs", 1)),
            svg=bool(table.get("output", {}).get("svg", False)),
            sdecomp=bool(table.get("sdecomp", {}).get("enabled", True)),
            sdecomp_stride=int(table.get("sdecomp", {}).get("time_stride", 4)),
            ergodic_params=dict(table.get("ergodic", {})),
            average_params=dict(table.get("average", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad experiment configuration: {exc}") from exc


def load_config(path: str, **overrides) -> ExperimentConfig:
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            table = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    return parse_config(table, **overrides)


# ---------------------------------------------------------------------------
# Convergence study
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceRow:
    epsilon: float
    replica: int
    sup_l2_err_u1: float
    sup_l2_err_u2: float
    weak_h1_err_u1: float
    weak_h1_err_u2: float
    s1: float = float("nan")
    s2: float = float("nan")
    s3: float = float("nan")


@dataclass
class ConvergenceReport:
    rows: list
    epsilons: tuple
    metrics: tuple = ("sup_l2_err_u1", "sup_l2_err_u2",
                      "weak_h1_err_u1", "weak_h1_err_u2")

    def values(self, epsilon: float, metric: str) -> np.ndarray:
        return np.asarray([getattr(r, metric) for r in self.rows
                           if r.epsilon == epsilon])

    def median(self, epsilon: float, metric: str) -> float:
        # midpoint rule: mean of the two central order statistics for even n
        return float(np.median(self.values(epsilon, metric)))

    def quartiles(self, epsilon: float, metric: str) -> tuple:
        v = self.values(epsilon, metric)
        return (float(np.percentile(v, 25, method="midpoint")),
                float(np.percentile(v, 75, method="midpoint")))

    def medians(self, metric: str) -> np.ndarray:
        return np.asarray([self.median(e, metric) for e in self.epsilons])

    def monotone(self, metric: str, strict: bool = False) -> bool:
        med = self.medians(metric)
        diffs = np.diff(med)
        return bool(np.all(diffs < 0.0) if strict else np.all(diffs <= 0.0))


def _test_panel(mesh: Mesh) -> list:
    """Fixed panel of smooth bump fields used by the weak-H1 metric."""
    return [SmoothField("sine", 1), SmoothField("sine", 2), SmoothField("poly")]


def _time_profiles(times: np.ndarray) -> list:
    return [np.ones_like(times), np.sin(np.pi * times / max(times[-1], 1e-300))]


def weak_h1_errors(eps_traj: Trajectory, avg_traj: Trajectory,
                   phi_fields: list) -> tuple:
    """max over the panel of |int_0^T psi <grad(u_eps - u_avg), grad(phi)> dt|."""
    mesh = eps_traj.mesh
    times = eps_traj.times
    profiles = _time_profiles(times)
    hfac = mesh.h ** (mesh.dimension - 2)
    diffs = _face_difference_ops(mesh)
    best = [0.0, 0.0]
    for i, (ue, ub) in enumerate(((eps_traj.u1, avg_traj.u1),
                                  (eps_traj.u2, avg_traj.u2))):
        delta = ue - ub                       # (n_times, ndof)
        for phi_vals in phi_fields:
            acc = np.zeros(times.size)
            for D in diffs:
                acc += hfac * ((delta @ D.T) @ (D @ phi_vals))
            for psi in profiles:
                err = abs(float(np.trapezoid(psi * acc, times)))
                best[i] = max(best[i], err)
    return best[0], best[1]


def sup_l2_errors(eps_traj: Trajectory, avg_traj: Trajectory) -> tuple:
    mesh = eps_traj.mesh
    hd = mesh.h ** mesh.dimension
    out = []
    for ue, ub in ((eps_traj.u1, avg_traj.u1), (eps_traj.u2, avg_traj.u2)):
        d = ue - ub
        out.append(float(np.sqrt(hd * np.max(np.einsum("ij,ij->i", d, d)))))
    return out[0], out[1]


def _study_pieces(config: ExperimentConfig):
    """Shared pipeline head: noise, cell solutions, averaged run, panels."""
    noise = config.build_noise()
    cell_mesh = Mesh(config.mesh.dimension, config.cell_n, PERIODIC)
    cells = (solve_cell(config.coeffs.A1, cell_mesh),
             solve_cell(config.coeffs.A2, cell_mesh))
    evaluator = AveragedAlphaEvaluator(config.coeffs.alpha, config.gh_order,
                                       config.n_y)
    avg_traj = solve_averaged(config.mesh, config.coeffs, cells[0].A_eff,
                              cells[1].A_eff, noise, config.dt,
                              config.t_final, config.initial_fields(),
                              evaluator, config.invariant_covariance,
                              config.checkpoint_stride)
    return noise, cells, evaluator, avg_traj


def _run_one(config: ExperimentConfig, noise, cells, evaluator, avg_traj,
             phi_panel, sdecomp_phis, sdecomp_psi, epsilon: float,
             replica: int) -> ConvergenceRow:
    u0 = config.initial_fields()
    run_cfg = EpsilonRunConfig(mesh=config.mesh, coeffs=config.coeffs,
                               noise=noise, epsilon=epsilon,
                               t_final=config.t_final, dt=config.dt,
                               u0=u0,
                               v0=initial_fast_fields(config, noise, u0, replica),
                               base_seed=config.base_seed, replica=replica,
                               checkpoint_stride=config.checkpoint_stride)
    traj = simulate(run_cfg)
    l2_1, l2_2 = sup_l2_errors(traj, avg_traj)
    h1_1, h1_2 = weak_h1_errors(traj, avg_traj, phi_panel)
    row = ConvergenceRow(epsilon=epsilon, replica=replica,
                         sup_l2_err_u1=l2_1, sup_l2_err_u2=l2_2,
                         weak_h1_err_u1=h1_1, weak_h1_err_u2=h1_2)
    if config.sdecomp:
        sd = s_decomposition(traj, avg_traj, config.coeffs, noise,
                             sdecomp_phis[epsilon], sdecomp_psi, evaluator,
                             config.invariant_covariance,
                             time_stride=config.sdecomp_stride)
        row.s1, row.s2, row.s3 = abs(sd.s1), abs(sd.s2), abs(sd.s3)
    return row


def run_convergence(config: ExperimentConfig) -> ConvergenceReport:
    """Full study: cell solves, averaged run, per-(epsilon, replica) errors.

    The weak-H1 error panel uses fixed smooth fields (the gradient-convergence
    metric needs epsilon-independent test functions); the S-decomposition
    functionals use the corrector-augmented companion per epsilon, mirroring
    the limit argument's test-function choice.
    """
    noise, cells, evaluator, avg_traj = _study_pieces(config)
    X = config.mesh.coords()
    base_panel = _test_panel(config.mesh)
    phi_panel = [f.values(X) for f in base_panel]
    sdecomp_phis = {
        eps: corrector_test_function(base_panel[0], cells[0], eps,
                                     config.mesh).values
        for eps in config.epsilons}
    sdecomp_psi = np.ones(avg_traj.times.size)

    tasks = [(eps, r) for eps in config.epsilons
             for r in range(config.replicas)]
    if config.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            futures = [pool.submit(_run_one, config, noise, cells, evaluator,
                                   avg_traj, phi_panel, sdecomp_phis,
                                   sdecomp_psi, eps, r)
                       for eps, r in tasks]
            rows = [f.result() for f in futures]
    else:
        rows = [_run_one(config, noise, cells, evaluator, avg_traj,
                         phi_panel, sdecomp_phis, sdecomp_psi, eps, r)
                for eps, r in tasks]
    rows.sort(key=lambda r: (config.epsilons.index(r.epsilon), r.replica))
    return ConvergenceReport(rows=rows, epsilons=config.epsilons)


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def emit_report(report: ConvergenceReport, directory: str,
                svg: bool = False) -> list:
    """Write convergence.csv, summary.csv, sdecomp.csv (and decay.svg).

    CSV is RFC-4180 (CRLF, header row); floats use shortest round-trip
    formatting so reading the file back reproduces the report exactly.
    """
    os.makedirs(directory, exist_ok=True)
    written = []

    path = os.path.join(directory, "convergence.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CONVERGENCE_COLUMNS)
        for r in report.rows:
            w.writerow([_fmt(r.epsilon), r.replica, _fmt(r.sup_l2_err_u1),
                        _fmt(r.sup_l2_err_u2), _fmt(r.weak_h1_err_u1),
                        _fmt(r.weak_h1_err_u2)])
    written.append(path)

    path = os.path.join(directory, "summary.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epsilon", "metric", "median", "q1", "q3"])
        for eps in report.epsilons:
            for metric in report.metrics:
                q1, q3 = report.quartiles(eps, metric)
                w.writerow([_fmt(eps), metric, _fmt(report.median(eps, metric)),
                            _fmt(q1), _fmt(q3)])
    written.append(path)

    if report.rows and not np.isnan(report.rows[0].s1):
        path = os.path.join(directory, "sdecomp.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epsilon", "replica", "abs_s1", "abs_s2", "abs_s3"])
            for r in report.rows:
                w.writerow([_fmt(r.epsilon), r.replica, _fmt(r.s1),
                            _fmt(r.s2), _fmt(r.s3)])
        written.append(path)

    if svg:
        written.append(_decay_plot(report, directory))
    return written


def read_report(path: str) -> ConvergenceReport:
    """Round-trip loader for convergence.csv."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames) != CONVERGENCE_COLUMNS:
            raise ConfigError("unexpected convergence.csv schema")
        for rec in reader:
            rows.append(ConvergenceRow(
                epsilon=float(rec["epsilon"]), replica=int(rec["replica"]),
                sup_l2_err_u1=float(rec["sup_l2_err_u1"]),
                sup_l2_err_u2=float(rec["sup_l2_err_u2"]),
                weak_h1_err_u1=float(rec["weak_h1_err_u1"]),
                weak_h1_err_u2=float(rec["weak_h1_err_u2"])))
    eps = tuple(dict.fromkeys(r.epsilon for r in rows))
    return ConvergenceReport(rows=rows, epsilons=eps)


# ---------------------------------------------------------------------------
# Other study kinds (cell / simulate / average / ergodic / validate)
# ---------------------------------------------------------------------------

def run_cell_study(config: ExperimentConfig, directory: str,
                   emit_correctors: bool = False) -> list:
    """Solve both cell problems; write a_eff.csv (and correctors.csv)."""
    cell_mesh = Mesh(config.mesh.dimension, config.cell_n, PERIODIC)
    os.makedirs(directory, exist_ok=True)
    written = []
    path = os.path.join(directory, "a_eff.csv")
    sols = []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tensor", "row", "col", "value", "residual",
                    "asymmetry_defect"])
        for name, spec in (("A1", config.coeffs.A1), ("A2", config.coeffs.A2)):
            sol = solve_cell(spec, cell_mesh)
            sols.append(sol)
            d = sol.dimension
            for i in range(d):
                for j in range(d):
                    w.writerow([name, i, j, _fmt(sol.A_eff[i, j]),
                                _fmt(float(sol.residuals.max())),
                                _fmt(sol.asymmetry_defect)])
    written.append(path)
    if emit_correctors:
        path = os.path.join(directory, "correctors.csv")
        X = cell_mesh.coords()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            coords = [f"y{i + 1}" for i in range(cell_mesh.dimension)]
            w.writerow(["tensor", "direction", *coords, "chi", "chi_adjoint"])
            for name, sol in zip(("A1", "A2"), sols):
                for k in range(sol.dimension):
                    for p in range(cell_mesh.ndof):
                        w.writerow([name, k,
                                    *[_fmt(c) for c in X[p]],
                                    _fmt(sol.correctors[k, p]),
                                    _fmt(sol.adjoint_correctors[k, p])])
        written.append(path)
    return written


def run_simulate_study(config: ExperimentConfig, directory: str) -> list:
    """One epsilon-run (first epsilon, replica 0); checkpoints + diagnostics."""
    noise = config.build_noise()
    u0 = config.initial_fields()
    run_cfg = EpsilonRunConfig(mesh=config.mesh, coeffs=config.coeffs,
                               noise=noise, epsilon=config.epsilons[0],
                               t_final=config.t_final, dt=config.dt, u0=u0,
                               v0=initial_fast_fields(config, noise, u0, 0),
                               base_seed=config.base_seed, replica=0,
                               checkpoint_stride=config.checkpoint_stride)
    traj = simulate(run_cfg)
    os.makedirs(directory, exist_ok=True)
    written = []
    path = os.path.join(directory, "trajectory.csv")
    X = config.mesh.coords()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        coords = [f"x{i + 1}" for i in range(config.mesh.dimension)]
        w.writerow(["time", *coords, "u1", "u2", "v1", "v2"])
        for s, t in enumerate(traj.times):
            for p in range(config.mesh.ndof):
                w.writerow([_fmt(t), *[_fmt(c) for c in X[p]],
                            _fmt(traj.u1[s, p]), _fmt(traj.u2[s, p]),
                            _fmt(traj.v1[s, p]), _fmt(traj.v2[s, p])])
    written.append(path)
    path = os.path.join(directory, "diagnostics.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        keys = sorted(traj.diagnostics)
        w.writerow(keys)
        w.writerow([_fmt(traj.diagnostics[k]) if isinstance(
            traj.diagnostics[k], float) else traj.diagnostics[k]
            for k in keys])
    written.append(path)
    return written


def run_average_study(config: ExperimentConfig, directory: str) -> list:
    """Tabulate bar-alpha over a (xi1, xi2) grid at representative variances."""
    noise = config.build_noise()
    from .fastsde import invariant_marginal
    zero = ScalarField(config.mesh, np.zeros(config.mesh.ndof))
    marg = invariant_marginal(FieldPair(zero, zero.copy()), noise,
                              config.invariant_covariance)
    p = config.average_params
    s1 = float(p.get("s1", np.mean(marg.s1)))
    s2 = float(p.get("s2", np.mean(marg.s2)))
    lo = float(p.get("xi_min", -2.0))
    hi = float(p.get("xi_max", 2.0))
    res = int(p.get("resolution", 33))
    evaluator = AveragedAlphaEvaluator(config.coeffs.alpha, config.gh_order,
                                       config.n_y)
    grid = np.linspace(lo, hi, res)
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, "alpha_table.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["xi1", "xi2", "s1", "s2", "alpha_bar"])
        for x1 in grid:
            vals = evaluator.averaged_alpha(np.full(res, x1), grid,
                                            np.full(res, s1), np.full(res, s2))
            for x2, v in zip(grid, vals):
                w.writerow([_fmt(x1), _fmt(x2), _fmt(s1), _fmt(s2), _fmt(v)])
    return [path]


def run_ergodic_study(config: ExperimentConfig, directory: str) -> dict:
    """Mixing report plus the window-average epsilon sweep; emits both CSVs."""
    from .ergodic import mixing_report, window_average_error
    p = config.ergodic_params
    noise = config.build_noise()
    mesh = config.mesh
    X = mesh.coords()

    # mixing study on the unit-rate fast process
    times = [float(t) for t in p.get("mixing_times", [0.5, 1.0, 1.5, 2.0, 2.5])]
    replicas = int(p.get("mixing_replicas", 10_000))
    probe_w = SmoothField("sine", 1).values(X)
    probe = LinearProbe(w1=probe_w, w2=np.zeros(mesh.ndof), mesh=mesh)
    offset = float(p.get("mixing_offset", 5.0))
    xi = FieldPair(ScalarField(mesh, 0.3 * probe_w),
                   ScalarField(mesh, np.zeros(mesh.ndof)))
    eta = FieldPair(ScalarField(mesh, (0.3 + offset) * probe_w),
                    ScalarField(mesh, np.zeros(mesh.ndof)))
    rng = make_rng(derive_seed(config.base_seed, "MIXING", 0))
    mix = mixing_report(probe, xi, eta, times, replicas, noise, rng,
                        config.invariant_covariance)

    # window-average sweep over the epsilon ladder
    eps_base = float(p.get("window_eps_base", 0.4))
    halvings = int(p.get("window_halvings", 3))
    eps_list = [eps_base * 0.5 ** k for k in range(halvings + 1)]
    w_replicas = int(p.get("window_replicas", 32))
    t0 = float(p.get("window_t0", 0.0125))
    w_T = float(p.get("window_T", 0.75))
    w_dt = float(p.get("window_dt", 0.003125))
    factors = [float(f) for f in p.get("delta_factors", [1.0])]
    exch = ExchangeProbe(alpha=config.coeffs.alpha, weight=probe_w, mesh=mesh)
    u0 = config.initial_fields()
    window_rows = []
    for eps in eps_list:
        for r in range(w_replicas):
            traj = simulate(EpsilonRunConfig(
                mesh=mesh, coeffs=config.coeffs, noise=noise, epsilon=eps,
                t_final=w_T, dt=w_dt, u0=u0, base_seed=config.base_seed,
                replica=r))
            for fac in factors:
                delta = fac * float(np.sqrt(eps))
                if t0 + delta > w_T + 1e-12:
                    continue
                wrng = make_rng(derive_seed(config.base_seed, "WINDOW",
                                            r * 1009 + int(fac * 8)))
                err = window_average_error(exch, traj, t0, delta,
                                           config.coeffs, noise, rng=wrng,
                                           convention=config.invariant_covariance)
                window_rows.append((eps, fac, r, err))

    os.makedirs(directory, exist_ok=True)
    written = []
    path = os.path.join(directory, "mixing.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "gap", "half_width", "fitted_rate", "bound_constant"])
        for t, g, hw in zip(mix.probe_times, mix.gaps, mix.half_widths):
            w.writerow([_fmt(t), _fmt(g), _fmt(hw), _fmt(mix.fitted_rate),
                        _fmt(mix.bound_constant)])
    written.append(path)
    path = os.path.join(directory, "window.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epsilon", "delta_factor", "replica", "error"])
        for eps, fac, r, err in window_rows:
            w.writerow([_fmt(eps), _fmt(fac), r, _fmt(err)])
    written.append(path)
    return {"mixing": mix, "window_rows": window_rows, "written": written,
            "window_epsilons": eps_list}


def window_medians(window_rows: list, epsilons: list,
                   factor: float = 1.0) -> np.ndarray:
    meds = []
    for eps in epsilons:
        errs = [err for e, fac, _, err in window_rows
                if e == eps and fac == factor]
        meds.append(np.median(errs) if errs else np.nan)
    return np.asarray(meds)


def _decay_plot(report: ConvergenceReport, directory: str) -> str:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(5, 4))
    eps = np.asarray(report.epsilons)
    for metric in report.metrics:
        ax.loglog(eps, report.medians(metric), "o-", label=metric)
    ax.set_xlabel("epsilon")
    ax.set_ylabel("median error")
    ax.legend(fontsize=7)
    fig.tight_layout()
    path = os.path.join(directory, "decay.svg")
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    return path
