"""Homogenized plate tensors from corrector cell problems.

Every tensor is the quadratic form (A, B) -> min over correctors of a stiff-
part energy with prestrain iota(A - x3 B). The three regimes differ in the
corrector class:

* delta in (0, inf): periodic vector correctors on the prism I x Y with the
  transversally scaled gradient (grad_y | delta^-1 d3);
* delta = 0: in-plane gradient correctors for the membrane block and
  periodic Hessian (C^1) correctors for the bending block, built on the
  transverse-reduced tensor C1^r;
* delta = inf: in-plane correctors of a 3-vector plus a constant transverse
  strain vector g (3 dense bordering columns).

Off-diagonal entries are recovered by polarization of 21 scalar minima.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import tensors as tn
from .fem import assemble as fa
from .fem import elements as el
from .fem.system import SolverError, SparseOperatorPair
from .geometry import CellMesh

# basis of symmetric 2x2 matrices in 2D-Voigt coordinate order (11, 22, 12)
_E2 = (np.array([[1.0, 0.0], [0.0, 0.0]]),
       np.array([[0.0, 0.0], [0.0, 1.0]]),
       np.array([[0.0, 0.5], [0.5, 0.0]]) * 2)  # E3 has A12 = 1

# polarization coordinates use A12 etc. directly; rescale to engineering
# Voigt matrices at the end
_S6 = np.diag([1.0, 1.0, 0.5, 1.0, 1.0, 0.5])
_S3 = np.diag([1.0, 1.0, 0.5])


class CellSolver:
    """Shared factorization for the (possibly kernel-deflated) cell system."""

    def __init__(self, pair: SparseOperatorPair):
        self.pair = pair
        K = pair.K.tocsc()
        if pair.kernel is not None:
            V = pair.kernel
            self._k = V.shape[1]
            A = sp.bmat([[K, sp.csc_matrix(V)],
                         [sp.csc_matrix(V.T), None]], format="csc")
            self._lu = spla.splu(A)
            self._V = V
        else:
            self._k = 0
            self._lu = spla.splu(K)
            self._V = None

    def solve(self, rhs: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        b = rhs if self._k == 0 else np.concatenate([rhs, np.zeros(self._k)])
        x = self._lu.solve(b)[:len(rhs)]
        resid = self.pair.K @ x - rhs
        if self._V is not None:
            x = x - self._V @ (self._V.T @ x)
            resid = resid - self._V @ (self._V.T @ resid)
        rel = np.linalg.norm(resid) / max(np.linalg.norm(rhs), 1e-300)
        if np.linalg.norm(rhs) > 0 and rel > tol:
            raise SolverError(f"cell solve residual {rel:.2e}")
        return x


@dataclass
class EffectiveTensor:
    regime: str                  # "delta" | "delta0" | "deltainf"
    memb: np.ndarray             # 3x3 2D Voigt
    bend: np.ndarray
    coupling: np.ndarray
    delta: float | None = None
    zero_corrector_bound: np.ndarray | None = None   # 6x6 pair form
    provenance: dict = field(default_factory=dict)

    def pair_form(self) -> np.ndarray:
        """6x6 Voigt matrix of the quadratic form on (A, B)."""
        Q = np.zeros((6, 6))
        Q[:3, :3] = self.memb
        Q[3:, 3:] = self.bend
        Q[:3, 3:] = self.coupling
        Q[3:, :3] = self.coupling.T
        return Q

    def eigenvalues(self) -> np.ndarray:
        """Tensor eigenvalues of the pair form (Frobenius metric)."""
        S = np.diag([1, 1, np.sqrt(2), 1, 1, np.sqrt(2.0)])
        return np.linalg.eigvalsh(S @ self.pair_form() @ S)

    def to_dict(self) -> dict:
        out = {
            "regime": self.regime,
            "memb": self.memb.tolist(),
            "bend": self.bend.tolist(),
            "coupling": self.coupling.tolist(),
            "provenance": self.provenance,
        }
        if self.delta is not None:
            out["delta"] = self.delta
        return out


def _polarize(values: dict, size: int) -> np.ndarray:
    """Quadratic-form matrix from scalar minima at P_i and P_i + P_j."""
    Q = np.zeros((size, size))
    for i in range(size):
        Q[i, i] = values[(i, i)]
    for i in range(size):
        for j in range(i + 1, size):
            Q[i, j] = Q[j, i] = 0.5 * (values[(i, j)] - Q[i, i] - Q[j, j])
    return Q


def _pair_loads(size6: bool):
    """Unit loads (A, B) for the polarization sweep: P_i and P_i + P_j."""
    loads = {}
    n = 6 if size6 else 3

    def pick(i):
        if not size6:
            return _E2[i], np.zeros((2, 2))
        if i < 3:
            return _E2[i], np.zeros((2, 2))
        return np.zeros((2, 2)), _E2[i - 3]

    for i in range(n):
        Ai, Bi = pick(i)
        loads[(i, i)] = (Ai, Bi)
        for j in range(i + 1, n):
            Aj, Bj = pick(j)
            loads[(i, j)] = (Ai + Aj, Bi + Bj)
    return loads


def _prestrain_voigt(A: np.ndarray, B: np.ndarray, x3: float) -> np.ndarray:
    M = A - x3 * B
    return np.array([M[0, 0], M[1, 1], 0.0, 0.0, 0.0, 2.0 * M[0, 1]])


def effective_delta(mat: tn.MaterialSpec, mesh3d: CellMesh, delta: float,
                    tol: float = 1e-9) -> EffectiveTensor:
    """C^hom for delta in (0, inf): prism cell problems over the stiff part."""
    if not (np.isfinite(delta) and delta > 0):
        raise ValueError("delta must be a positive finite number")
    if mesh3d.dim != 3:
        raise ValueError("delta-regime cell problems need a prism mesh")
    pair = fa.assemble_vector_h1(
        mesh3d, mat.C1, grad=fa.ScaledGradientSpec(delta),
        space="periodic-zero-mean", restrict_to="stiff", ncomp=3)
    solver = CellSolver(pair)
    hsize = mesh3d.element_size()
    stiff_ids = np.flatnonzero(~mesh3d.element_soft)
    layer_of = stiff_ids // (mesh3d.n ** 2)
    z0 = mesh3d.nodes[mesh3d.elements[stiff_ids][:, 0], 2]
    third = ("dz", 1.0 / delta)

    qpts, qwts = el.q1_quadrature(hsize)

    def value(A, B):
        # per-layer element loads (the prestrain only depends on x3)
        rhs = np.zeros(pair.dof.n_free)
        e0 = 0.0
        for k in np.unique(layer_of):
            sel = stiff_ids[layer_of == k]
            z_org = z0[layer_of == k][0]
            fe = el.q1_prestrain_load(
                hsize, mat.C1,
                lambda pt: _prestrain_voigt(A, B, z_org + pt[2]), third=third)
            eds = pair.dof.element_dofs(mesh3d.elements[sel])
            ok = eds >= 0
            np.add.at(rhs, eds[ok], np.tile(fe, (len(sel), 1))[ok])
            for pt, w in zip(qpts, qwts):
                v = _prestrain_voigt(A, B, z_org + pt[2])
                e0 += len(sel) * w * (v @ mat.C1 @ v)
        phi = solver.solve(rhs, tol)
        return e0 - rhs @ phi

    vals = {key: value(A, B) for key, (A, B) in _pair_loads(True).items()}
    Q = _S6 @ _polarize(vals, 6) @ _S6
    upper = {key: _zero_corrector_energy_prism(mat.C1, mesh3d, A, B)
             for key, (A, B) in _pair_loads(True).items()}
    U = _S6 @ _polarize(upper, 6) @ _S6
    return EffectiveTensor(
        regime="delta", delta=delta, memb=Q[:3, :3], bend=Q[3:, 3:],
        coupling=Q[:3, 3:], zero_corrector_bound=U,
        provenance={"n": mesh3d.n, "n_z": mesh3d.n_z, "tol": tol})


def _zero_corrector_energy_prism(C, mesh3d, A, B):
    hsize = mesh3d.element_size()
    qpts, qwts = el.q1_quadrature(hsize)
    stiff_ids = np.flatnonzero(~mesh3d.element_soft)
    z0 = mesh3d.nodes[mesh3d.elements[stiff_ids][:, 0], 2]
    total = 0.0
    for k, count in zip(*np.unique(stiff_ids // (mesh3d.n ** 2), return_counts=True)):
        z_org = z0[stiff_ids // (mesh3d.n ** 2) == k][0]
        for pt, w in zip(qpts, qwts):
            v = _prestrain_voigt(A, B, z_org + pt[2])
            total += count * w * (v @ C @ v)
    return total


def _voigt2(A):
    return np.array([A[0, 0], A[1, 1], 2.0 * A[0, 1]])


def effective_delta0(mat: tn.MaterialSpec, mesh2d: CellMesh,
                     tol: float = 1e-9) -> EffectiveTensor:
    """C^{hom,r} for delta = 0: 2D membrane and Hessian cell problems with
    the transverse-reduced stiff tensor; the bending block carries 1/12."""
    if mesh2d.dim != 2:
        raise ValueError("delta=0 cell problems are two-dimensional")
    Cr = tn.reduced_tensor(mat.C1)
    stiff_frac = 1.0 - mesh2d.soft_area_fraction()

    pm = fa.assemble_vector_h1(mesh2d, Cr, space="periodic-zero-mean",
                               restrict_to="stiff", ncomp=2)
    sm = CellSolver(pm)
    hsize = mesh2d.element_size()
    area = hsize[0] * hsize[1]
    n_stiff = np.count_nonzero(~mesh2d.element_soft)

    def memb_value(A):
        v2 = _voigt2(A)
        fe = el.q1_prestrain_load(hsize, Cr, lambda pt: v2, ncomp=2)
        rhs = fa.assemble_element_load(mesh2d, pm.dof, {"stiff": fe}, "stiff")
        phi = sm.solve(rhs, tol)
        e0 = n_stiff * area * (v2 @ Cr @ v2)
        return e0 - rhs @ phi

    pb = fa.assemble_bfs_h2(mesh2d, Cr, space="periodic-zero-mean",
                            restrict_to="stiff")
    sb = CellSolver(pb)

    def bend_value(B):
        v2 = _voigt2(B)
        fe = el.bfs_prestrain_load(hsize, Cr, lambda pt: v2)
        rhs = fa.assemble_element_load(mesh2d, pb.dof, {"stiff": fe}, "stiff")
        phi = sb.solve(rhs, tol)
        e0 = n_stiff * area * (v2 @ Cr @ v2)
        return (e0 - rhs @ phi) / 12.0

    vals_m = {k: memb_value(A) for k, (A, _) in _pair_loads(False).items()}
    vals_b = {k: bend_value(A) for k, (A, _) in _pair_loads(False).items()}
    memb = _S3 @ _polarize(vals_m, 3) @ _S3
    bend = _S3 @ _polarize(vals_b, 3) @ _S3
    return EffectiveTensor(
        regime="delta0", memb=memb, bend=bend, coupling=np.zeros((3, 3)),
        zero_corrector_bound=_flat_zero_corrector_bound(mat.C1, stiff_frac),
        provenance={"n": mesh2d.n, "tol": tol})


def _flat_zero_corrector_bound(C1: np.ndarray, stiff_frac: float) -> np.ndarray:
    """Zero-corrector pair form  |Y1| * int_I C1 iota(A - x3 B):iota(A - x3 B)
    = |Y1| (C1 iota(A):iota(A) + C1 iota(B):iota(B)/12) for x3-flat cells."""
    vals = {}
    for key, (A, B) in _pair_loads(True).items():
        va = _prestrain_voigt(A, np.zeros((2, 2)), 0.0)
        vb = _prestrain_voigt(B, np.zeros((2, 2)), 0.0)
        vals[key] = stiff_frac * (va @ C1 @ va + (vb @ C1 @ vb) / 12.0)
    return _S6 @ _polarize(vals, 6) @ _S6


def _deltainf_system(mat: tn.MaterialSpec, mesh2d: CellMesh):
    """Sparse w-block plus 3 dense bordering columns for the constant
    transverse strain vector g."""
    pair = fa.assemble_vector_h1(mesh2d, mat.C1, space="periodic-zero-mean",
                                 restrict_to="stiff", ncomp=3)
    hsize = mesh2d.element_size()
    area = hsize[0] * hsize[1]
    stiff_ids = np.flatnonzero(~mesh2d.element_soft)
    n_stiff = len(stiff_ids)

    # element blocks: B_w rows 6-voigt for (w1,w2,w3) with the strain of
    # C_inf; B_g the 6x3 map of g; see module docstring
    qpts, qwts = el.q1_quadrature(hsize)
    nw = 12
    Kwg_e = np.zeros((nw, 3))
    Kgg = np.zeros((3, 3))
    Kww_extra = np.zeros((nw, nw))
    Bg = np.zeros((6, 3))
    Bg[2, 2] = 1.0
    Bg[3, 1] = 2.0
    Bg[4, 0] = 2.0
    for pt, w in zip(qpts, qwts):
        N, dNdx, dNdy, _ = el._q1_eval(hsize, pt)
        Bw = np.zeros((6, nw))
        Bw[0, 0::3] = dNdx
        Bw[1, 1::3] = dNdy
        Bw[3, 2::3] = 2.0 * dNdy    # entry (2,3) of C_inf is g2 + d2 w3
        Bw[4, 2::3] = 2.0 * dNdx
        Bw[5, 0::3] = dNdy
        Bw[5, 1::3] = dNdx
        Kwg_e += w * (Bw.T @ mat.C1 @ Bg)
        Kgg += w * (Bg.T @ mat.C1 @ Bg)
        Kww_extra += w * (Bw.T @ mat.C1 @ Bw)
    # the assembled pair.K used sym iota(grad w) with half shear weights on
    # the transverse rows; rebuild K_ww here with the C_inf strain instead
    kt = ([], [], [])
    eds = pair.dof.element_dofs(mesh2d.elements[stiff_ids])
    fa.scatter(eds, Kww_extra, pair.dof.n_free, kt)
    Kww = fa.triplets_to_csr(kt, pair.dof.n_free)
    Kwg = np.zeros((pair.dof.n_free, 3))
    for e in range(len(stiff_ids)):
        d = eds[e]
        ok = d >= 0
        np.add.at(Kwg, d[ok], Kwg_e[ok])
    Kgg *= n_stiff
    return pair, Kww, Kwg, Kgg, Bg, n_stiff * area


def effective_deltainf(mat: tn.MaterialSpec, mesh2d: CellMesh,
                       tol: float = 1e-9) -> EffectiveTensor:
    """C^{hom,h} for delta = inf; bending equals the membrane block over 12
    (the x3-odd corrector split is exact in this regime)."""
    if mesh2d.dim != 2:
        raise ValueError("delta=inf cell problems are two-dimensional")
    pair, Kww, Kwg, Kgg, Bg, stiff_area = _deltainf_system(mat, mesh2d)
    V = pair.kernel
    k = V.shape[1] if V is not None else 0
    blocks = [[Kww, sp.csc_matrix(Kwg), sp.csc_matrix(V) if k else None],
              [sp.csc_matrix(Kwg.T), sp.csc_matrix(Kgg), None],
              [sp.csc_matrix(V.T) if k else None, None, None]]
    if k == 0:
        blocks = [row[:2] for row in blocks[:2]]
    A = sp.bmat(blocks, format="csc")
    lu = spla.splu(A)
    hsize = mesh2d.element_size()
    stiff_ids = np.flatnonzero(~mesh2d.element_soft)

    def value(Aload):
        v = np.zeros(6)
        v[[0, 1]] = np.diag(Aload)
        v[5] = 2.0 * Aload[0, 1]
        # prestrain load against the C_inf strain operator (not sym iota)
        qpts, qwts = el.q1_quadrature(hsize)
        fe = np.zeros(12)
        fg = np.zeros(3)
        e0 = 0.0
        for pt, w in zip(qpts, qwts):
            N, dNdx, dNdy, _ = el._q1_eval(hsize, pt)
            Bw = np.zeros((6, 12))
            Bw[0, 0::3] = dNdx
            Bw[1, 1::3] = dNdy
            Bw[3, 2::3] = 2.0 * dNdy
            Bw[4, 2::3] = 2.0 * dNdx
            Bw[5, 0::3] = dNdy
            Bw[5, 1::3] = dNdx
            fe -= w * (Bw.T @ (mat.C1 @ v))
            fg -= w * (Bg.T @ (mat.C1 @ v))
            e0 += w * (v @ mat.C1 @ v)
        rhs_w = fa.assemble_element_load(mesh2d, pair.dof, {"stiff": fe}, "stiff")
        rhs = np.concatenate([rhs_w, fg * len(stiff_ids), np.zeros(k)])
        sol = lu.solve(rhs)
        return e0 * len(stiff_ids) - rhs[:pair.dof.n_free + 3] @ sol[:pair.dof.n_free + 3]

    vals = {key: value(A_) for key, (A_, _) in _pair_loads(False).items()}
    memb = _S3 @ _polarize(vals, 3) @ _S3
    stiff_frac = 1.0 - mesh2d.soft_area_fraction()
    return EffectiveTensor(
        regime="deltainf", memb=memb, bend=memb / 12.0,
        coupling=np.zeros((3, 3)),
        zero_corrector_bound=_flat_zero_corrector_bound(mat.C1, stiff_frac),
        provenance={"n": mesh2d.n, "tol": tol})
