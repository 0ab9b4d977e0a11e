"""Direct 3D discretization of the original scaled problem on the fixed
domain omega x I: coefficients C1 on the stiff matrix and mu_h^2 C0 on the
eps-periodic inclusions, transversally scaled gradient (grad | h^-1 d3),
Dirichlet on gamma_D x I.  Used to observe the Hausdorff trend of fine
spectra toward the computed limit sets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from . import tensors as tn
from .fem import elements as el
from .fem.system import (DofMap, EigWorkspace, SparseOperatorPair,
                         eigs_smallest, scatter, triplets_to_csr)
from .geometry import ConfigurationError, InclusionShape

DOF_BUDGET = 200_000


def mu_value(mu_scaling: str, eps: float, h: float) -> float:
    if mu_scaling == "eps":
        return eps
    if mu_scaling == "eps_h":
        return eps * h
    if mu_scaling == "eps2":
        return eps ** 2
    if mu_scaling == "one":
        return 1.0
    raise ConfigurationError(f"unknown contrast scaling {mu_scaling!r}")


@dataclass
class FineMesh:
    nodes: np.ndarray
    elements: np.ndarray
    element_soft: np.ndarray
    hsize: tuple
    shape_inplane: tuple[int, int]
    n_layers: int

    @property
    def n_nodes(self):
        return self.nodes.shape[0]


def _build_fine_mesh(L1, L2, eps, cells_per_eps, n_z, shape: InclusionShape,
                     z_span=(-0.5, 0.5)) -> FineMesh:
    ncx, ncy = L1 / eps, L2 / eps
    if abs(ncx - round(ncx)) > 1e-9 or abs(ncy - round(ncy)) > 1e-9:
        raise ConfigurationError("omega must be tiled by an integer number "
                                 "of eps-cells")
    nx = int(round(ncx)) * cells_per_eps
    ny = int(round(ncy)) * cells_per_eps
    tx = L1 * np.arange(nx + 1) / nx
    ty = L2 * np.arange(ny + 1) / ny
    lo, hi = z_span
    tz = lo + (hi - lo) * np.arange(n_z + 1) / n_z
    npl = (nx + 1) * (ny + 1)
    X, Y = np.meshgrid(tx, ty, indexing="xy")
    nodes2 = np.column_stack([X.ravel(), Y.ravel()])
    nodes = np.empty(((n_z + 1) * npl, 3))
    for k, z in enumerate(tz):
        nodes[k * npl:(k + 1) * npl, :2] = nodes2
        nodes[k * npl:(k + 1) * npl, 2] = z

    def nid(i, j):
        return j * (nx + 1) + i

    conn2 = np.empty((nx * ny, 4), dtype=int)
    e = 0
    for j in range(ny):
        for i in range(nx):
            conn2[e] = (nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1))
            e += 1
    conn = np.vstack([np.hstack([conn2 + k * npl, conn2 + (k + 1) * npl])
                      for k in range(n_z)])
    cent2 = nodes2[conn2].mean(axis=1)
    frac = np.mod(cent2 / eps, 1.0)
    soft2 = shape.contains(frac) if shape is not None else \
        np.zeros(len(conn2), dtype=bool)
    soft = np.tile(soft2, n_z)
    return FineMesh(nodes=nodes, elements=conn, element_soft=soft,
                    hsize=(L1 / nx, L2 / ny, (hi - lo) / n_z),
                    shape_inplane=(nx, ny), n_layers=n_z)


@dataclass
class FineProblem:
    mat: tn.MaterialSpec
    shape: InclusionShape
    h: float
    epsilon: float
    mu_scaling: str
    tau: int
    mesh: FineMesh
    pair: SparseOperatorPair
    parity: str | None = None
    meta: dict = field(default_factory=dict)

    @property
    def mu(self) -> float:
        return mu_value(self.mu_scaling, self.epsilon, self.h)


def build_fine_problem(mat: tn.MaterialSpec, shape: InclusionShape, h: float,
                       epsilon: float, mu_scaling: str = "eps", tau: int = 0,
                       cells_per_eps: int = 8, n_z: int = 4,
                       L1: float = 1.0, L2: float = 1.0,
                       gamma=("left",), parity: str | None = None,
                       budget: int = DOF_BUDGET) -> FineProblem:
    """Assemble h^-tau-scaled stiffness and density-weighted mass of the
    fine operator; parity='memb' meshes the half plate with the membrane
    symmetry plane at x3 = 0."""
    if parity not in (None, "memb", "bend"):
        raise ConfigurationError(f"unknown parity {parity!r}")
    z_span = (0.0, 0.5) if parity else (-0.5, 0.5)
    nz = n_z // 2 if parity else n_z
    if parity and n_z % 2:
        raise ConfigurationError("parity restriction needs an even n_z")
    mesh = _build_fine_mesh(L1, L2, epsilon, cells_per_eps, max(nz, 1), shape,
                            z_span)
    ndofs = 3 * mesh.n_nodes
    if ndofs > budget:
        raise ConfigurationError(f"{ndofs} DOFs exceed the budget {budget}")

    mu = mu_value(mu_scaling, epsilon, h)
    dof = DofMap(mesh.n_nodes, 3)
    diri = np.flatnonzero(np.isclose(mesh.nodes[:, 0], 0.0))
    if "left" in gamma:
        dof.constrain(diri)
    if "right" in gamma:
        dof.constrain(np.flatnonzero(np.isclose(mesh.nodes[:, 0], L1)))
    if parity:
        plane = np.flatnonzero(np.isclose(mesh.nodes[:, 2], 0.0))
        dof.constrain(plane, comps=2 if parity == "memb" else [0, 1])
    dof.finalize()

    scale = 2.0 if parity else 1.0
    third = ("dz", 1.0 / h)
    kt, mt = ([], [], []), ([], [], [])
    groups = {"stiff": (np.flatnonzero(~mesh.element_soft), mat.C1, mat.rho1),
              "soft": (np.flatnonzero(mesh.element_soft),
                       mu ** 2 * mat.C0, mat.rho0)}
    for ids, C, rho in groups.values():
        if len(ids) == 0:
            continue
        Ke = el.q1_stiffness(mesh.hsize, C, third=third, ncomp=3)
        Me = el.q1_mass(mesh.hsize, rho, ncomp=3)
        eds = dof.index[mesh.elements[ids]].reshape(len(ids), -1)
        scatter(eds, scale * Ke, dof.n_free, kt)
        scatter(eds, scale * Me, dof.n_free, mt)
    pair = SparseOperatorPair(K=triplets_to_csr(kt, dof.n_free),
                              M=triplets_to_csr(mt, dof.n_free), dof=dof)
    return FineProblem(mat=mat, shape=shape, h=h, epsilon=epsilon,
                       mu_scaling=mu_scaling, tau=tau, mesh=mesh, pair=pair,
                       parity=parity,
                       meta={"cells_per_eps": cells_per_eps, "n_z": n_z,
                             "gamma": tuple(gamma), "L": (L1, L2)})


def fine_eigs(fp: FineProblem, N: int, ws: EigWorkspace | None = None):
    """Smallest N eigenvalues of h^-tau A_eps (ascending)."""
    scaled = SparseOperatorPair(K=fp.h ** (-fp.tau) * fp.pair.K,
                                M=fp.pair.M, dof=fp.pair.dof)
    if ws is None:
        ws = EigWorkspace(solver="shift-invert" if scaled.n > 4000 else "dense")
    w, v = eigs_smallest(scaled, N, ws)
    return w, v


def fine_resolvent(fp: FineProblem, lam: float, load) -> dict:
    """Solve (h^-tau a_eps + lambda m) u = f for a separable LoadSpec and
    report the displacement with its transverse averages and per-cell means."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    mesh = fp.mesh
    amp = np.asarray(load.amplitude, dtype=float)
    tfun = load.transverse_fn()
    cfun = load.cell_fn(fp.shape)
    mac = load.macro_fn()
    eps = fp.epsilon

    def fe_builder(origin):
        def value_at(pt):
            x = origin[:2] + np.asarray(pt[:2])
            z = origin[2] + pt[2]
            y = np.mod(x / eps, 1.0)
            return amp * mac(x) * tfun(z) * cfun(y)
        return el.q1_vector_load(mesh.hsize, value_at, ncomp=3)

    F = np.zeros(fp.pair.dof.n_free)
    for e in range(len(mesh.elements)):
        origin = mesh.nodes[mesh.elements[e][0]]
        fe = fe_builder(origin)
        eds = fp.pair.dof.index[mesh.elements[e]].ravel()
        ok = eds >= 0
        np.add.at(F, eds[ok], fe[ok])
    A = (fp.h ** (-fp.tau) * fp.pair.K + lam * fp.pair.M).tocsc()
    u = spla.splu(A).solve(F)
    full = fp.pair.dof.expand(u)
    return {"u": full, "transverse_average": transverse_average(fp, full),
            "cell_means": cell_means(fp, full)}


def transverse_average(fp: FineProblem, full_field: np.ndarray) -> np.ndarray:
    """Trapezoidal x3-average of a nodal field, per in-plane node."""
    mesh = fp.mesh
    nx, ny = mesh.shape_inplane
    npl = (nx + 1) * (ny + 1)
    layers = full_field.reshape(mesh.n_layers + 1, npl, -1)
    w = np.full(mesh.n_layers + 1, 1.0)
    w[0] = w[-1] = 0.5
    w /= w.sum()
    avg = np.einsum("k,kij->ij", w, layers)
    if fp.parity == "memb":
        avg[:, 2] = 0.0   # odd component averages to zero over the full I
    return avg


def cell_means(fp: FineProblem, full_field: np.ndarray) -> np.ndarray:
    """In-plane mean of the transverse average over each eps-cell."""
    mesh = fp.mesh
    nx, ny = mesh.shape_inplane
    c = fp.meta["cells_per_eps"]
    avg = transverse_average(fp, full_field)
    grid = avg.reshape(ny + 1, nx + 1, -1)
    ncx, ncy = nx // c, ny // c
    out = np.empty((ncy, ncx, grid.shape[-1]))
    for j in range(ncy):
        for i in range(ncx):
            out[j, i] = grid[j * c:(j + 1) * c + 1,
                             i * c:(i + 1) * c + 1].mean(axis=(0, 1))
    return out
