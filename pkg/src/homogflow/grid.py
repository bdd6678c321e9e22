"""Structured meshes, nodal fields, finite-volume diffusion operators, norms.

The physical domain is the unit interval/square with homogeneous Dirichlet
conditions; the unit cell carries periodic conditions.  Diagonal tensor
entries are sampled at nodes and harmonically averaged onto faces in the flux
direction (so a 1D layered medium is reproduced exactly); off-diagonal entries
are arithmetically averaged onto cell centers, where the cross part of the
bilinear form is assembled symmetrically.
"""

from dataclasses import dataclass
from functools import lru_cache
import numpy as np
import scipy.sparse as sp

DIRICHLET = "dirichlet"
PERIODIC = "periodic"


class SolverError(RuntimeError):
    """Linear or time-step solve failed; carries residual/step context."""

    def __init__(self, message, residual=None, step=None):
        super().__init__(message)
        self.residual = residual
        self.step = step


@dataclass(frozen=True)
class Mesh:
    """Uniform grid on [0,1]^d with n cells per side; h = 1/n.

    Dirichlet meshes carry degrees of freedom on interior nodes only;
    periodic meshes on all n nodes per side.
    """

    dimension: int
    n: int
    bc: str = DIRICHLET

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if self.n < 4:
            raise ValueError("need at least 4 cells per side")
        if self.bc not in (DIRICHLET, PERIODIC):
            raise ValueError(f"unknown boundary tag {self.bc!r}")
        if abs(self.h * self.n - 1.0) >= 1e-15:
            raise ValueError("h*n must equal 1 to within 1e-15")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def nodes_per_side(self) -> int:
        return self.n - 1 if self.bc == DIRICHLET else self.n

    @property
    def ndof(self) -> int:
        return self.nodes_per_side ** self.dimension

    def axis_coords(self) -> np.ndarray:
        if self.bc == DIRICHLET:
            return np.arange(1, self.n) * self.h
        return np.arange(self.n) * self.h

    def coords(self) -> np.ndarray:
        """Node coordinates, shape (ndof, d), x-major flattening."""
        x = self.axis_coords()
        if self.dimension == 1:
            return x[:, None]
        X, Y = np.meshgrid(x, x, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    def closed_axis_coords(self) -> np.ndarray:
        """Grid line including boundary nodes (Dirichlet) or one period (periodic)."""
        if self.bc == DIRICHLET:
            return np.arange(self.n + 1) * self.h
        return np.arange(self.n) * self.h


@dataclass
class ScalarField:
    """Nodal values on a mesh, flattened x-major."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.size != self.mesh.ndof:
            raise ValueError("value count does not match mesh dof count")

    def copy(self) -> "ScalarField":
        return ScalarField(self.mesh, self.values.copy())


def field_from_callable(mesh: Mesh, fn) -> ScalarField:
    return ScalarField(mesh, fn(mesh.coords()))


def field_to_csv(field: ScalarField, path: str) -> None:
    """One row per node: coordinates, value (RFC-4180, round-trip floats)."""
    import csv
    X = field.mesh.coords()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(field.mesh.dimension)]
                   + ["value"])
        for p in range(field.mesh.ndof):
            w.writerow([repr(float(c)) for c in X[p]]
                       + [repr(float(field.values[p]))])


def field_from_csv(mesh: Mesh, path: str) -> ScalarField:
    """Read back a field written by field_to_csv onto the same mesh."""
    import csv
    vals = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            vals.append(float(rec["value"]))
    return ScalarField(mesh, np.asarray(vals))


@dataclass
class FieldPair:
    """Two scalar fields on the same mesh (continuum 1 and continuum 2)."""

    f1: ScalarField
    f2: ScalarField

    def __post_init__(self):
        if self.f1.mesh != self.f2.mesh:
            raise ValueError("field pair must share one mesh")

    @property
    def mesh(self) -> Mesh:
        return self.f1.mesh


# ---------------------------------------------------------------------------
# Difference operators (cached per mesh)
# ---------------------------------------------------------------------------

def _diff_1d(n: int, bc: str) -> sp.csr_matrix:
    """Forward differences onto the n faces of one grid line (no 1/h)."""
    if bc == DIRICHLET:
        m = n - 1
        rows, cols, vals = [], [], []
        for f in range(n):
            if f < m:
                rows.append(f); cols.append(f); vals.append(1.0)
            if f - 1 >= 0:
                rows.append(f); cols.append(f - 1); vals.append(-1.0)
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, m))
    eye = sp.identity(n, format="csr")
    shift = sp.csr_matrix((np.ones(n), ((np.arange(n)), (np.arange(n) + 1) % n)),
                          shape=(n, n))
    return (shift - eye).tocsr()


def _avg_1d(n: int, bc: str) -> sp.csr_matrix:
    """Average adjacent node pairs onto the n cells of one grid line."""
    if bc == DIRICHLET:
        m = n - 1
        rows, cols, vals = [], [], []
        for c in range(n):
            if c - 1 >= 0:
                rows.append(c); cols.append(c - 1); vals.append(0.5)
            if c < m:
                rows.append(c); cols.append(c); vals.append(0.5)
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, m))
    eye = sp.identity(n, format="csr")
    shift = sp.csr_matrix((np.ones(n), ((np.arange(n)), (np.arange(n) + 1) % n)),
                          shape=(n, n))
    return (0.5 * (eye + shift)).tocsr()


@lru_cache(maxsize=32)
def _face_difference_ops(mesh: Mesh) -> tuple:
    """Per-direction difference matrices from dofs to face grids."""
    d1 = _diff_1d(mesh.n, mesh.bc)
    if mesh.dimension == 1:
        return (d1,)
    m = mesh.nodes_per_side
    eye = sp.identity(m, format="csr")
    return (sp.kron(d1, eye, format="csr"), sp.kron(eye, d1, format="csr"))


@lru_cache(maxsize=32)
def _cell_gradient_ops(mesh: Mesh) -> tuple:
    """Cell-centered average gradients (include the 1/h), d=2 only."""
    d1 = _diff_1d(mesh.n, mesh.bc) / mesh.h
    a1 = _avg_1d(mesh.n, mesh.bc)
    gx = sp.kron(d1, a1, format="csr")
    gy = sp.kron(a1, d1, format="csr")
    return (gx, gy)


# ---------------------------------------------------------------------------
# Tensor sampling at faces / cells
# ---------------------------------------------------------------------------

@dataclass
class FaceTensor:
    """Diffusion tensor sampled for assembly: diagonal entries on the face
    grids (harmonic averages of nodal samples along the flux direction) and
    off-diagonal entries on cell centers (arithmetic corner averages)."""

    mesh: Mesh
    diag: tuple            # per direction, flattened face arrays
    cross: dict            # {(i, j): cell array}; empty in 1D or for diagonal A


def _harmonic_pairs(a_line: np.ndarray, axis: int, bc: str) -> np.ndarray:
    """Harmonic means of adjacent samples along one axis (wraps if periodic)."""
    a = np.moveaxis(a_line, axis, 0)
    if bc == DIRICHLET:
        left, right = a[:-1], a[1:]
    else:
        left, right = a, np.roll(a, -1, axis=0)
    harm = 2.0 * left * right / (left + right)
    return np.moveaxis(harm, 0, axis)


def _corner_means(a_closed: np.ndarray, bc: str) -> np.ndarray:
    """Arithmetic mean of the 2^d corner samples for each cell (2D)."""
    a = a_closed
    if bc == PERIODIC:
        a = np.pad(a, ((0, 1), (0, 1)), mode="wrap")
    return 0.25 * (a[:-1, :-1] + a[1:, :-1] + a[:-1, 1:] + a[1:, 1:])


def sample_face_tensor(mesh: Mesh, tensor_spec, epsilon: float | None = None) -> FaceTensor:
    """Sample a tensor spec onto faces/cells; epsilon rescales via y = x/epsilon."""
    from . import coeffs as _coeffs

    def sample(points):
        y = points / epsilon if epsilon is not None else points
        return _coeffs.eval_tensor_many(tensor_spec, _coeffs.wrap_unit_cell(y))

    closed = mesh.closed_axis_coords()
    if mesh.dimension == 1:
        a = sample(closed[:, None])[:, 0, 0]
        if np.any(a <= 0.0):
            raise SolverError("non-SPD tensor samples on the grid line")
        diag = (_harmonic_pairs(a, 0, mesh.bc).ravel(),)
        return FaceTensor(mesh, diag, {})

    open_ax = mesh.axis_coords()
    # a_xx on closed-x x open-y, a_yy on open-x x closed-y, full at corners
    Xc, Yo = np.meshgrid(closed, open_ax, indexing="ij")
    axx = sample(np.column_stack([Xc.ravel(), Yo.ravel()]))[:, 0, 0]
    axx = axx.reshape(Xc.shape)
    Xo, Yc = np.meshgrid(open_ax, closed, indexing="ij")
    ayy = sample(np.column_stack([Xo.ravel(), Yc.ravel()]))[:, 1, 1]
    ayy = ayy.reshape(Xo.shape)
    if np.any(axx <= 0.0) or np.any(ayy <= 0.0):
        raise SolverError("non-SPD tensor samples on the grid lines")
    dx = _harmonic_pairs(axx, 0, mesh.bc).ravel()
    dy = _harmonic_pairs(ayy, 1, mesh.bc).ravel()

    Xa, Ya = np.meshgrid(closed, closed, indexing="ij")
    full = sample(np.column_stack([Xa.ravel(), Ya.ravel()]))
    axy = full[:, 0, 1].reshape(Xa.shape)
    ayx = full[:, 1, 0].reshape(Xa.shape)
    cross = {}
    if np.any(axy != 0.0) or np.any(ayx != 0.0):
        cxy = _corner_means(axy, mesh.bc).ravel()
        cyx = _corner_means(ayx, mesh.bc).ravel()
        cross = {(0, 1): cxy, (1, 0): cyx}
        # sampled SPD check of the symmetric part at cell centers
        sym = 0.5 * (cxy + cyx)
        dxx = _corner_means(full[:, 0, 0].reshape(Xa.shape), mesh.bc).ravel()
        dyy = _corner_means(full[:, 1, 1].reshape(Xa.shape), mesh.bc).ravel()
        if np.any(dxx * dyy - sym * sym <= 0.0):
            raise SolverError("non-SPD symmetric part at cell centers")
    return FaceTensor(mesh, (dx, dy), cross)


def assemble_diffusion(mesh: Mesh, face_tensor: FaceTensor) -> sp.csr_matrix:
    """Operator L with <Lu, w> h^d = sum_faces h^d a (Du/h)(Dw/h) + cross terms.

    L is the nodal finite-volume form of -div(A grad .); symmetric positive
    (semi)definite for symmetric A, with constants in its kernel on periodic
    meshes.
    """
    for arr in face_tensor.diag:
        if np.any(arr <= 0.0):
            raise SolverError("non-SPD face tensor")
    diffs = _face_difference_ops(mesh)
    h2 = mesh.h * mesh.h
    L = None
    for D, a in zip(diffs, face_tensor.diag):
        term = (D.T @ sp.diags(a) @ D) / h2
        L = term if L is None else L + term
    if face_tensor.cross:
        gx, gy = _cell_gradient_ops(mesh)
        G = {0: gx, 1: gy}
        for (i, j), a in face_tensor.cross.items():
            L = L + G[i].T @ sp.diags(a) @ G[j]
    return L.tocsr()


# ---------------------------------------------------------------------------
# Norms and pairings
# ---------------------------------------------------------------------------

def l2_norm(f: ScalarField) -> float:
    """Midpoint-quadrature L2 norm (boundary values are zero on Dirichlet meshes)."""
    h = f.mesh.h
    return float(np.sqrt(h ** f.mesh.dimension * np.dot(f.values, f.values)))


def h1_seminorm(f: ScalarField) -> float:
    """Face-difference quadrature of the squared gradient."""
    mesh = f.mesh
    acc = 0.0
    for D in _face_difference_ops(mesh):
        g = D @ f.values
        acc += np.dot(g, g)
    return float(np.sqrt(mesh.h ** (mesh.dimension - 2) * acc))


def weak_pairing(f: ScalarField, phi: ScalarField) -> float:
    """Discrete integral of f * phi over D."""
    if f.mesh != phi.mesh:
        raise ValueError("weak pairing requires a shared mesh")
    return float(f.mesh.h ** f.mesh.dimension * np.dot(f.values, phi.values))


def h1_pairing(f: ScalarField, phi: ScalarField) -> float:
    """Discrete integral of grad f . grad phi over D."""
    if f.mesh != phi.mesh:
        raise ValueError("h1 pairing requires a shared mesh")
    mesh = f.mesh
    acc = 0.0
    for D in _face_difference_ops(mesh):
        acc += np.dot(D @ f.values, D @ phi.values)
    return float(mesh.h ** (mesh.dimension - 2) * acc)


def face_gradients(values: np.ndarray, mesh: Mesh) -> list:
    """Per-direction face differences divided by h; accepts stacked rows."""
    return [(D @ np.atleast_2d(values).T).T / mesh.h
            for D in _face_difference_ops(mesh)]


# ---------------------------------------------------------------------------
# Smooth analytic test fields (vanish on the Dirichlet boundary)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SmoothField:
    """Analytic test field with gradient; kind "sine" or "poly"."""

    kind: str = "sine"
    mode: int = 1
    amplitude: float = 1.0

    def values(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        v = np.full(X.shape[0], self.amplitude)
        for i in range(X.shape[1]):
            xi = X[:, i]
            if self.kind == "sine":
                v = v * np.sin(self.mode * np.pi * xi)
            else:
                v = v * 16.0 * xi * xi * (1.0 - xi) * (1.0 - xi)
        return v

    def gradient(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        npts, d = X.shape
        parts = []
        dparts = []
        for i in range(d):
            xi = X[:, i]
            if self.kind == "sine":
                parts.append(np.sin(self.mode * np.pi * xi))
                dparts.append(self.mode * np.pi * np.cos(self.mode * np.pi * xi))
            else:
                parts.append(16.0 * xi * xi * (1.0 - xi) * (1.0 - xi))
                dparts.append(16.0 * 2.0 * xi * (1.0 - xi) * (1.0 - 2.0 * xi))
        g = np.empty((npts, d))
        for i in range(d):
            gi = np.full(npts, self.amplitude)
            for j in range(d):
                gi = gi * (dparts[j] if j == i else parts[j])
            g[:, i] = gi
        return g


def dirichlet_mode(mesh: Mesh, modes) -> ScalarField:
    """Discrete Dirichlet sine mode prod_i sin(k_i pi x_i) on interior nodes."""
    if mesh.bc != DIRICHLET:
        raise ValueError("dirichlet_mode needs a Dirichlet mesh")
    k = np.atleast_1d(np.asarray(modes, dtype=float))
    X = mesh.coords()
    v = np.ones(mesh.ndof)
    for i in range(mesh.dimension):
        v = v * np.sin(k[i] * np.pi * X[:, i])
    return ScalarField(mesh, v)


def dirichlet_eigenvalue(mesh: Mesh, modes) -> float:
    """Discrete eigenvalue of the identity-tensor operator for a sine mode."""
    k = np.atleast_1d(np.asarray(modes, dtype=float))
    h = mesh.h
    return float(sum((2.0 / h ** 2) * (1.0 - np.cos(k[i] * np.pi * h))
                     for i in range(mesh.dimension)))
