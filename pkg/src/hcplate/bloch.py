"""Eigenproblems on the soft inclusion: the zero-lateral-trace operators
whose eigenvalues are the micro-resonances, their density-weighted mean
vectors, coupled/uncoupled classification, and the strip fiber curve whose
minimum is the essential-spectrum bottom for very thin cells.

Operator tags
-------------
full_delta / memb_delta / bend_delta : prism I x Y0 with the transversally
    scaled gradient (delta finite); the parity variants mesh the half
    interval x3 in (0, 1/2) with parity conditions at x3 = 0 and double all
    integrals.
memb_delta0 : 2D in-plane vector operator with the reduced tensor C0^r.
bend_delta0 : scalar C^1 (BFS) operator with (1/12) C0^r Hessian energy.
memb_deltainf / full_deltainf : 2D 3-component operator with strain
    sym iota(grad_y u); the two tags differ only in which mean components
    are tracked for the coupled/uncoupled split.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensors as tn
from .fem import assemble as fa
from .fem.system import EigWorkspace, SparseOperatorPair, eigs_smallest
from .geometry import CellMesh, InclusionShape, build_cell_mesh

CLUSTER_GAP = 1e-6       # relative eigenvalue gap defining a multiplicity cluster
MEAN_ZERO_FACTOR = 1e-7  # weighted mean treated as zero below this * <rho0>


@dataclass
class BlochSpectrum:
    operator_tag: str
    eigenvalues: np.ndarray          # ascending, > 0
    modes: np.ndarray                # columns, M-orthonormal
    weighted_means: np.ndarray       # (N, n_tracked)
    tracked: tuple[int, ...]         # which displacement components are tracked
    classification: list[str]        # per eigenvalue: "coupled" | "uncoupled"
    rho0_mass: float                 # <rho0>_h = 1^T M 1 per tracked component
    rho0_area_mass: float = 0.0      # rho0 * |Y0_disc| (element-area sum)
    pair: SparseOperatorPair = field(repr=False, default=None)
    mesh: CellMesh = field(repr=False, default=None)
    scale: float = 1.0               # 2 for half-interval parity meshes

    @property
    def n_modes(self) -> int:
        return len(self.eigenvalues)

    def coupled(self):
        keep = [i for i, c in enumerate(self.classification) if c == "coupled"]
        return self.eigenvalues[keep], self.weighted_means[keep]

    def uncoupled_eigenvalues(self) -> np.ndarray:
        keep = [i for i, c in enumerate(self.classification) if c == "uncoupled"]
        return self.eigenvalues[keep]

    def gram_partial_sums(self) -> np.ndarray:
        """S_N = sum_{n<=N} m_n m_n^T, shape (N, k, k)."""
        k = self.weighted_means.shape[1]
        out = np.zeros((self.n_modes, k, k))
        acc = np.zeros((k, k))
        for n in range(self.n_modes):
            m = self.weighted_means[n]
            acc = acc + np.outer(m, m)
            out[n] = acc
        return out

    def modal_coefficients(self, load_vec: np.ndarray) -> np.ndarray:
        """(load, phi_n) for an assembled (unweighted) load vector."""
        return self.modes.T @ load_vec


def _classify(eigenvalues, means, rho0_mass):
    """Cluster-safe split: an eigenvalue is uncoupled only if every mode in
    its multiplicity cluster has (numerically) zero weighted mean."""
    n = len(eigenvalues)
    labels = [""] * n
    thresh = MEAN_ZERO_FACTOR * rho0_mass
    i = 0
    while i < n:
        j = i + 1
        while j < n and abs(eigenvalues[j] - eigenvalues[j - 1]) \
                <= CLUSTER_GAP * max(1.0, abs(eigenvalues[j])):
            j += 1
        cluster_zero = all(np.linalg.norm(means[k]) <= thresh for k in range(i, j))
        for k in range(i, j):
            labels[k] = "uncoupled" if cluster_zero else "coupled"
        i = j
    return labels


def _build_prism_operator(mat, shape: InclusionShape, n: int, n_z: int,
                          delta: float, parity: str | None):
    if parity is None:
        mesh = build_cell_mesh(shape, n=n, dim=3, n_z=n_z)
        scale, extra = 1.0, ()
    else:
        if n_z % 2:
            raise ValueError("parity restriction needs an even n_z")
        mesh = build_cell_mesh(shape, n=n, dim=3, n_z=n_z // 2,
                               z_span=(0.0, 0.5))
        scale = 2.0
        plane = np.flatnonzero(np.isclose(mesh.nodes[:, 2], 0.0))
        # membrane: u3 odd in x3; bending: u1, u2 odd
        extra = ((plane, 2),) if parity == "memb" else ((plane, [0, 1]),)
    pair = fa.assemble_vector_h1(
        mesh, mat.C0, grad=fa.ScaledGradientSpec(delta), density=mat.rho0,
        space="inclusion-zero-trace", restrict_to="soft", ncomp=3,
        extra_constraints=extra)
    pair.K = pair.K * scale
    pair.M = pair.M * scale
    return mesh, pair, scale


def build_inclusion_operator(mat: tn.MaterialSpec, shape: InclusionShape,
                             n: int, operator_tag: str, delta: float | None = None,
                             n_z: int = 4):
    """Mesh + operator pair + tracked components for one inclusion operator."""
    if operator_tag.startswith(("full_delta", "memb_delta", "bend_delta")) \
            and operator_tag not in ("memb_delta0", "bend_delta0",
                                     "memb_deltainf", "full_deltainf"):
        if delta is None or not (0 < delta < np.inf):
            raise ValueError("finite-delta operators need delta in (0, inf)")
        parity = {"full_delta": None, "memb_delta": "memb",
                  "bend_delta": "bend"}[operator_tag]
        mesh, pair, scale = _build_prism_operator(mat, shape, n, n_z, delta, parity)
        tracked = {"full_delta": (0, 1, 2), "memb_delta": (0, 1),
                   "bend_delta": (2,)}[operator_tag]
        return mesh, pair, tracked, scale
    if operator_tag == "memb_delta0":
        mesh = build_cell_mesh(shape, n=n)
        Cr = tn.reduced_tensor(mat.C0)
        pair = fa.assemble_vector_h1(mesh, Cr, density=mat.rho0,
                                     space="inclusion-zero-trace",
                                     restrict_to="soft", ncomp=2)
        return mesh, pair, (0, 1), 1.0
    if operator_tag == "bend_delta0":
        mesh = build_cell_mesh(shape, n=n)
        Cr = tn.reduced_tensor(mat.C0)
        pair = fa.assemble_bfs_h2(mesh, Cr, density=mat.rho0,
                                  space="inclusion-clamped", restrict_to="soft")
        pair.K = pair.K / 12.0
        return mesh, pair, (0,), 1.0
    if operator_tag in ("memb_deltainf", "full_deltainf"):
        mesh = build_cell_mesh(shape, n=n)
        pair = fa.assemble_vector_h1(mesh, mat.C0, density=mat.rho0,
                                     space="inclusion-zero-trace",
                                     restrict_to="soft", ncomp=3)
        tracked = (0, 1) if operator_tag == "memb_deltainf" else (0, 1, 2)
        return mesh, pair, tracked, 1.0
    raise ValueError(f"unknown operator tag {operator_tag!r}")


def mean_load_vectors(pair: SparseOperatorPair, tracked) -> np.ndarray:
    """Columns L_c with (L_c)^T u = int rho0 u_c over the inclusion; for the
    scalar BFS variant the constant lives in the value DOFs."""
    cols = []
    for c in tracked:
        comp = 0 if pair.dof.ncomp == 4 else c
        cols.append(pair.M @ fa.constant_reduced_field(pair.dof, comp))
    return np.column_stack(cols)


def bloch_spectrum(mat: tn.MaterialSpec, shape: InclusionShape, n: int,
                   operator_tag: str, N: int, delta: float | None = None,
                   n_z: int = 4, ws: EigWorkspace | None = None) -> BlochSpectrum:
    """Smallest N eigenpairs of the requested inclusion operator with
    density-weighted means and coupled/uncoupled classification."""
    if N < 1:
        raise ValueError("need at least one mode")
    mesh, pair, tracked, scale = build_inclusion_operator(
        mat, shape, n, operator_tag, delta=delta, n_z=n_z)
    if N > pair.n:
        raise ValueError(f"requested {N} modes from {pair.n} inclusion DOFs")
    # solve a few extra pairs and cut at a multiplicity-cluster boundary, so
    # a degenerate pole pair is never split by the truncation
    n_solve = min(N + 4, pair.n)
    w, v = eigs_smallest(pair, n_solve, ws)
    cut = N
    while cut < n_solve and abs(w[cut] - w[cut - 1]) \
            <= CLUSTER_GAP * max(1.0, abs(w[cut])):
        cut += 1
    w, v = w[:cut], v[:, :cut]
    L = mean_load_vectors(pair, tracked)
    means = v.T @ L
    comp = 0 if pair.dof.ncomp == 4 else tracked[0]
    ones = fa.constant_reduced_field(pair.dof, comp)
    rho0_mass = float(ones @ (pair.M @ ones))   # clipped-constant mass
    rho0_area = mat.rho0 * mesh.soft_area_fraction()
    labels = _classify(w, means, rho0_area)
    return BlochSpectrum(operator_tag=operator_tag, eigenvalues=w, modes=v,
                         weighted_means=means, tracked=tuple(tracked),
                         classification=labels, rho0_mass=rho0_mass,
                         rho0_area_mass=rho0_area, pair=pair, mesh=mesh,
                         scale=scale)


def strip_fiber_bottom(mat: tn.MaterialSpec, mesh2d: CellMesh, eta: float,
                       ws: EigWorkspace | None = None) -> float:
    """Smallest eigenvalue of the Hermitian strip fiber at wavenumber eta."""
    pair = fa.assemble_vector_h1(mesh2d, mat.C0, density=mat.rho0,
                                 space="inclusion-zero-trace",
                                 restrict_to="soft", ncomp=3,
                                 eta=eta if eta != 0.0 else None)
    w, _ = eigs_smallest(pair, 1, ws)
    return float(w[0])


def strip_bottom_m0(mat: tn.MaterialSpec, mesh2d: CellMesh, eta_grid,
                    ws: EigWorkspace | None = None, refine_tol: float = 1e-4):
    """Bottom of the strip operator spectrum: min over eta of the first
    fiber eigenvalue, with one golden-section refinement around the grid
    minimizer. Returns (m0, curve) with curve rows (eta, alpha_1^eta)."""
    eta_grid = np.asarray(eta_grid, dtype=float)
    if eta_grid.size == 0:
        raise ValueError("empty eta grid")
    vals = np.array([strip_fiber_bottom(mat, mesh2d, e, ws) for e in eta_grid])
    curve = np.column_stack([eta_grid, vals])
    i = int(np.argmin(vals))
    lo = eta_grid[max(i - 1, 0)]
    hi = eta_grid[min(i + 1, len(eta_grid) - 1)]
    if hi <= lo:
        return float(vals[i]), curve
    # golden-section refinement of the (locally convex) fiber curve
    invphi = (np.sqrt(5.0) - 1) / 2
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc = strip_fiber_bottom(mat, mesh2d, c, ws)
    fd = strip_fiber_bottom(mat, mesh2d, d, ws)
    for _ in range(40):
        if b - a < refine_tol * max(1.0, abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = strip_fiber_bottom(mat, mesh2d, c, ws)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = strip_fiber_bottom(mat, mesh2d, d, ws)
    m0 = min(float(vals[i]), fc, fd)
    return m0, curve
