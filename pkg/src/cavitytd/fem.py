"""P1 finite elements for the coupled frequency-domain cavity problem.

Each cavity is discretized independently: an epsilon-weighted mass matrix,
a (1/mu)-weighted stiffness matrix (3-point triangle quadrature for the
variable coefficients), homogeneous Dirichlet walls eliminated exactly,
and a sparse interpolation matrix carrying the finite-element aperture
trace onto the uniform line grid.  The cavities couple only through the
shared line operator: the assembled action at frequency s is

    u  ->  s*M u + (1/s)*K u - (1/(s*mu0)) * R^T Q B R u

with Q the uniform line quadrature and B the FFT boundary operator over
the union of the zero-extended aperture traces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    DimensionMismatch,
    DomainError,
    FactorizationFailure,
    SingularElement,
    UnsupportedPolarization,
)
from .scene import CavitySpec, Mesh, Scene
from .trace import DtnSymbol, TraceGrid, TraceVector, apply_B_columns

__all__ = [
    "FemMatrices",
    "SystemOperator",
    "assemble",
    "assemble_all",
    "aperture_quadrature",
    "apply_rhs",
    "build_system",
    "build_system_single",
    "export_matrix",
]

# Barycentric coordinates of the three edge midpoints (degree-2 exact rule).
_MIDPOINT_LAMBDAS = np.array(
    [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]
)


@dataclass
class FemMatrices:
    """Per-cavity discrete operators on the full node set.

    mass / stiffness carry the material weights (epsilon, 1/mu); the unit
    variants back the L2 / H1-seminorm evaluations of the estimate checks.
    restriction interpolates nodal aperture values onto the trace grid
    (one linear-interpolation pair per sample under the aperture, zero
    rows elsewhere); it is None when no grid was supplied.
    """

    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    mass_unit: sp.csr_matrix
    stiffness_unit: sp.csr_matrix
    wall_nodes: np.ndarray
    free_nodes: np.ndarray
    aperture_nodes: np.ndarray
    restriction: sp.csr_matrix | None = None

    @property
    def n_nodes(self) -> int:
        return self.mass.shape[0]

    @property
    def n_free(self) -> int:
        return self.free_nodes.size

    def l2_norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(abs(np.vdot(u, self.mass_unit @ u).real)))

    def h1_seminorm(self, u: np.ndarray) -> float:
        return float(np.sqrt(abs(np.vdot(u, self.stiffness_unit @ u).real)))


def assemble(mesh: Mesh, cavity: CavitySpec, grid: TraceGrid | None = None) -> FemMatrices:
    """Assemble the P1 matrices of one cavity (and its trace restriction)."""
    areas = mesh.areas()
    if np.any(areas <= 0.0):
        bad = int(np.argmin(areas))
        raise SingularElement(f"triangle {bad} has non-positive area {areas[bad]}")

    tris = mesh.triangles
    p = mesh.vertices[tris]  # (nt, 3, 2)

    # Constant P1 gradients: grad(lambda_i) = rot(edge opposite i) / (2A).
    gx = np.stack(
        [
            p[:, 1, 1] - p[:, 2, 1],
            p[:, 2, 1] - p[:, 0, 1],
            p[:, 0, 1] - p[:, 1, 1],
        ],
        axis=1,
    ) / (2.0 * areas[:, None])
    gy = np.stack(
        [
            p[:, 2, 0] - p[:, 1, 0],
            p[:, 0, 0] - p[:, 2, 0],
            p[:, 1, 0] - p[:, 0, 0],
        ],
        axis=1,
    ) / (2.0 * areas[:, None])

    # Material samples at the edge midpoints.
    qpts = _MIDPOINT_LAMBDAS @ p.reshape(-1, 3, 2)  # (nt, 3q, 2) via broadcasting
    qx, qy = qpts[..., 0], qpts[..., 1]
    eps_q = cavity.epsilon(qx, qy)
    inv_mu_q = 1.0 / cavity.mu(qx, qy)
    w = areas[:, None] / 3.0

    grad_dot = gx[:, :, None] * gx[:, None, :] + gy[:, :, None] * gy[:, None, :]
    k_local = grad_dot * np.sum(w * inv_mu_q, axis=1)[:, None, None]
    k1_local = grad_dot * areas[:, None, None]

    lam = _MIDPOINT_LAMBDAS  # (3q, 3i)
    lam_outer = lam[:, :, None] * lam[:, None, :]  # (3q, 3i, 3j)
    m_local = np.einsum("tq,qij->tij", w * eps_q, lam_outer)
    m1_local = np.einsum("tq,qij->tij", w * np.ones_like(eps_q), lam_outer)

    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    n = mesh.n_vertices

    def to_csr(local: np.ndarray) -> sp.csr_matrix:
        return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()

    wall = mesh.wall_nodes()
    free = np.setdiff1d(np.arange(n), wall)

    restriction = _trace_restriction(mesh, cavity, grid) if grid is not None else None
    return FemMatrices(
        mass=to_csr(m_local),
        stiffness=to_csr(k_local),
        mass_unit=to_csr(m1_local),
        stiffness_unit=to_csr(k1_local),
        wall_nodes=wall,
        free_nodes=free,
        aperture_nodes=mesh.aperture_nodes,
        restriction=restriction,
    )


def assemble_all(scene: Scene, meshes: list[Mesh], grid: TraceGrid | None = None) -> list[FemMatrices]:
    if len(meshes) != scene.n_cavities:
        raise DimensionMismatch(
            f"{len(meshes)} meshes for {scene.n_cavities} cavities"
        )
    return [assemble(m, c, grid) for m, c in zip(meshes, scene.cavities)]


def _trace_restriction(mesh: Mesh, cavity: CavitySpec, grid: TraceGrid) -> sp.csr_matrix:
    """Linear interpolation from aperture nodal values to trace samples."""
    j = _aperture_index(cavity, grid)
    mask = grid.masks[j]
    ap = mesh.aperture_nodes
    xa = mesh.vertices[ap, 0]
    rows, cols, vals = [], [], []
    ks = np.nonzero(mask)[0]
    seg = np.clip(np.searchsorted(xa, grid.x[ks], side="right"), 1, len(xa) - 1)
    left, right = ap[seg - 1], ap[seg]
    t = (grid.x[ks] - xa[seg - 1]) / (xa[seg] - xa[seg - 1])
    for k, l, r, tk in zip(ks, left, right, t):
        rows.extend((k, k))
        cols.extend((l, r))
        vals.extend((1.0 - tk, tk))
    return sp.csr_matrix(
        (vals, (rows, cols)), shape=(grid.N, mesh.n_vertices)
    )


def _aperture_index(cavity: CavitySpec, grid: TraceGrid) -> int:
    for j, (a, b) in enumerate(grid.apertures):
        if abs(a - cavity.aperture[0]) < 1e-12 and abs(b - cavity.aperture[1]) < 1e-12:
            return j
    raise DimensionMismatch(
        f"cavity aperture {cavity.aperture} not present on the trace grid"
    )


def aperture_quadrature(grid: TraceGrid, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Sample indices and trapezoid weights for integrals over aperture j.

    Composite trapezoid over the samples inside the interval: half weight
    on the first and last sample.  Used for load vectors, where the
    integrand need not vanish at the aperture ends; the nonlocal pairings
    keep the uniform periodic weights instead.
    """
    ks = np.nonzero(grid.masks[j])[0]
    w = np.full(ks.size, grid.dx)
    w[0] *= 0.5
    w[-1] *= 0.5
    return ks, w


def apply_rhs(
    g_freq: TraceVector, meshes: list[Mesh], grid: TraceGrid, fems: list[FemMatrices] | None = None
) -> list[np.ndarray]:
    """Load vectors <data, hat_i> over each aperture, full node set per cavity.

    Entry i integrates the line data against the trace of hat function i
    using the aperture trapezoid rule, which reproduces the exact hat
    integrals (h inside, h/2 at the corner nodes) when grid samples align
    with the aperture nodes.
    """
    if g_freq.values.shape != (grid.N,):
        raise DimensionMismatch(
            f"data of length {g_freq.values.shape} does not match grid N={grid.N}"
        )
    if len(meshes) != grid.n_apertures:
        raise DimensionMismatch(
            f"{len(meshes)} meshes for a grid with {grid.n_apertures} apertures"
        )
    loads = []
    for j, mesh in enumerate(meshes):
        ks, w = aperture_quadrature(grid, j)
        ap = mesh.aperture_nodes
        xa = mesh.vertices[ap, 0]
        b = np.zeros(mesh.n_vertices, dtype=np.complex128)
        seg = np.clip(np.searchsorted(xa, grid.x[ks], side="right"), 1, len(xa) - 1)
        t = (grid.x[ks] - xa[seg - 1]) / (xa[seg] - xa[seg - 1])
        contrib = w * g_freq.values[ks]
        np.add.at(b, ap[seg - 1], (1.0 - t) * contrib)
        np.add.at(b, ap[seg], t * contrib)
        loads.append(b)
    return loads


@dataclass
class SystemOperator:
    """Frequency-domain coupled operator with a lazy direct factorization."""

    s: complex
    grid: TraceGrid
    mu0: float
    matrix: sp.csc_matrix
    fems: list[FemMatrices]
    free_offsets: np.ndarray
    ordering: str = "COLAMD"
    _lu: spla.SuperLU | None = field(default=None, repr=False)

    @property
    def n_dofs(self) -> int:
        return self.matrix.shape[0]

    def matvec(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u

    def factorize(self) -> spla.SuperLU:
        if self._lu is None:
            try:
                self._lu = spla.splu(self.matrix, permc_spec=self.ordering)
            except RuntimeError as exc:
                raise FactorizationFailure(
                    f"sparse factorization failed at s={self.s}: {exc}"
                ) from exc
        return self._lu

    def solve(self, b: np.ndarray) -> np.ndarray:
        return self.factorize().solve(b)

    def restrict_loads(self, loads: list[np.ndarray]) -> np.ndarray:
        if len(loads) != len(self.fems):
            raise DimensionMismatch(
                f"{len(loads)} load blocks for {len(self.fems)} cavities"
            )
        return np.concatenate(
            [b[f.free_nodes] for b, f in zip(loads, self.fems)]
        )

    def expand(self, x: np.ndarray) -> list[np.ndarray]:
        """Scatter a free-DOF vector back to full per-cavity node vectors."""
        out = []
        for f, lo in zip(self.fems, self.free_offsets):
            full = np.zeros(f.n_nodes, dtype=np.complex128)
            full[f.free_nodes] = x[lo : lo + f.n_free]
            out.append(full)
        return out


def _coupling_block(
    r_stack: sp.csr_matrix, s: complex, grid: TraceGrid, sym: DtnSymbol
) -> tuple[np.ndarray, np.ndarray]:
    """Dense aperture coupling R^T Q B R restricted to its nonzero columns."""
    csc = r_stack.tocsc()
    ap_cols = np.nonzero(np.diff(csc.indptr) > 0)[0]
    ra = np.asarray(csc[:, ap_cols].todense())
    b_cols = apply_B_columns(ra.astype(np.complex128), s, grid, sym)
    block = ra.T @ (grid.dx * b_cols)
    return block, ap_cols


def _volume_block(fem: FemMatrices, s: complex) -> sp.csr_matrix:
    free = fem.free_nodes
    m = fem.mass[free][:, free]
    k = fem.stiffness[free][:, free]
    return (s * m + (1.0 / s) * k).tocsr()


def build_system(
    scene: Scene,
    meshes: list[Mesh],
    grid: TraceGrid,
    s: complex,
    fems: list[FemMatrices] | None = None,
    ordering: str = "COLAMD",
) -> SystemOperator:
    """Assemble the coupled operator for all cavities at frequency s.

    Cross-cavity blocks enter only through the boundary operator applied
    to the union of zero-extended traces; everything else is block
    diagonal per cavity.
    """
    s = complex(s)
    if s.real <= 0.0:
        raise DomainError(f"frequency must satisfy Re s > 0, got s={s}")
    if scene.polarization != "TE":
        raise UnsupportedPolarization(
            "only the TE reduction has a solve path; TM exchanges the "
            "material roles and needs Neumann walls"
        )
    if len(meshes) != scene.n_cavities or grid.n_apertures != scene.n_cavities:
        raise DimensionMismatch(
            f"scene has {scene.n_cavities} cavities, got {len(meshes)} meshes "
            f"and {grid.n_apertures} grid apertures"
        )
    if fems is None:
        fems = assemble_all(scene, meshes, grid)

    blocks = [_volume_block(f, s) for f in fems]
    r_stack = sp.hstack(
        [f.restriction[:, f.free_nodes] for f in fems], format="csr"
    )
    volume = sp.block_diag(blocks, format="csr")
    sym = DtnSymbol(scene.c)
    coupling, ap_cols = _coupling_block(r_stack, s, grid, sym)
    dtn = sp.coo_matrix(
        (
            (-1.0 / (s * scene.mu0)) * coupling.ravel(),
            (
                np.repeat(ap_cols, ap_cols.size),
                np.tile(ap_cols, ap_cols.size),
            ),
        ),
        shape=volume.shape,
    )
    matrix = (volume + dtn).tocsc()
    offsets = np.concatenate([[0], np.cumsum([f.n_free for f in fems])[:-1]])
    return SystemOperator(
        s=s,
        grid=grid,
        mu0=scene.mu0,
        matrix=matrix,
        fems=fems,
        free_offsets=offsets,
        ordering=ordering,
    )


def build_system_single(
    scene: Scene,
    mesh: Mesh,
    grid: TraceGrid,
    s: complex,
    fem: FemMatrices | None = None,
    ordering: str = "COLAMD",
) -> SystemOperator:
    """Straight-line single-cavity assembly (degeneracy reference path).

    Mirrors the one-cavity variational form directly, without the
    multi-cavity stacking; the general path with one cavity must reproduce
    it bit for bit.
    """
    s = complex(s)
    if s.real <= 0.0:
        raise DomainError(f"frequency must satisfy Re s > 0, got s={s}")
    if scene.n_cavities != 1:
        raise DimensionMismatch("single-cavity path requires exactly one cavity")
    if fem is None:
        fem = assemble(mesh, scene.cavities[0], grid)
    volume = _volume_block(fem, s)
    r_free = fem.restriction[:, fem.free_nodes].tocsr()
    sym = DtnSymbol(scene.c)
    coupling, ap_cols = _coupling_block(r_free, s, grid, sym)
    dtn = sp.coo_matrix(
        (
            (-1.0 / (s * scene.mu0)) * coupling.ravel(),
            (
                np.repeat(ap_cols, ap_cols.size),
                np.tile(ap_cols, ap_cols.size),
            ),
        ),
        shape=volume.shape,
    )
    matrix = (volume + dtn).tocsc()
    return SystemOperator(
        s=s,
        grid=grid,
        mu0=scene.mu0,
        matrix=matrix,
        fems=[fem],
        free_offsets=np.array([0]),
        ordering=ordering,
    )


def export_matrix(path: str | Path, matrix: sp.spmatrix) -> None:
    """Coordinate text dump (row, col, Re, Im) for offline inspection."""
    coo = matrix.tocoo()
    with open(path, "w", encoding="utf-8") as f:
        f.write("row,col,re,im\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            v = complex(v)
            f.write(f"{r},{c},{v.real:.17g},{v.imag:.17g}\n")
