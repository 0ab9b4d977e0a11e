"""Elasticity tensor algebra: Voigt storage, embeddings, reduced tensors.

Conventions used across the package:

* 3D tensors act on symmetric 3x3 matrices and are stored as symmetric 6x6
  Voigt matrices in the order (11, 22, 33, 23, 13, 12) with engineering
  (factor-2) shear strains, so that ``C xi : xi == voigt_strain(xi) @ C @
  voigt_strain(xi)``.
* 2D (reduced) tensors act on symmetric 2x2 matrices and are stored as 3x3
  Voigt matrices in the order (11, 22, 12), same shear convention.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

VOIGT3 = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))
VOIGT2 = ((0, 0), (1, 1), (0, 1))

# engineering <-> tensor (Mandel) rescaling of the shear rows/columns
_MANDEL_W3 = np.diag([1.0, 1.0, 1.0, np.sqrt(2.0), np.sqrt(2.0), np.sqrt(2.0)])
_MANDEL_W2 = np.diag([1.0, 1.0, np.sqrt(2.0)])


def voigt_strain(xi: np.ndarray) -> np.ndarray:
    """Engineering Voigt vector of a symmetric 3x3 matrix."""
    return np.array([xi[0, 0], xi[1, 1], xi[2, 2],
                     2.0 * xi[1, 2], 2.0 * xi[0, 2], 2.0 * xi[0, 1]])


def voigt_strain_2d(a: np.ndarray) -> np.ndarray:
    """Engineering Voigt vector of a symmetric 2x2 matrix."""
    return np.array([a[0, 0], a[1, 1], 2.0 * a[0, 1]])


def quad_form(C: np.ndarray, xi: np.ndarray) -> float:
    """C xi : xi for a 6x6 Voigt tensor and a symmetric 3x3 matrix."""
    v = voigt_strain(xi)
    return float(v @ C @ v)


def quad_form_2d(C: np.ndarray, a: np.ndarray) -> float:
    v = voigt_strain_2d(a)
    return float(v @ C @ v)


def mandel(C: np.ndarray) -> np.ndarray:
    """Rescale a Voigt matrix so its eigenvalues are those of the tensor
    viewed as an operator on symmetric matrices (Frobenius inner product)."""
    W = _MANDEL_W3 if C.shape[0] == 6 else _MANDEL_W2
    return W @ C @ W


def isotropic(lam: float, mu: float) -> np.ndarray:
    """6x6 Voigt matrix of the isotropic tensor lam*tr(e)I + 2 mu e."""
    C = np.zeros((6, 6))
    C[:3, :3] = lam
    C[:3, :3] += 2.0 * mu * np.eye(3)
    C[3:, 3:] = mu * np.eye(3)
    return C


def isotropic_2d(lam: float, mu: float) -> np.ndarray:
    """Plane-stress-type reduction of the isotropic tensor (equals
    reduced_tensor(isotropic(lam, mu)), kept in closed form for oracles)."""
    lam_r = 2.0 * lam * mu / (lam + 2.0 * mu)
    C = np.zeros((3, 3))
    C[:2, :2] = lam_r
    C[:2, :2] += 2.0 * mu * np.eye(2)
    C[2, 2] = mu
    return C


def iota(M: np.ndarray) -> np.ndarray:
    """Embed a 2x2 or 3x2 matrix into R^{3x3} by zero-padding."""
    M = np.asarray(M, dtype=float)
    out = np.zeros((3, 3))
    if M.shape == (2, 2):
        out[:2, :2] = M
    elif M.shape == (3, 2):
        out[:, :2] = M
    else:
        raise ValueError(f"iota expects a 2x2 or 3x2 matrix, got {M.shape}")
    return out


def iota1(a) -> np.ndarray:
    """Symmetric 3x3 matrix with a1, a2 on the transverse row/column and a3
    in the (3,3) slot; zero in-plane block."""
    a = np.asarray(a, dtype=float)
    if a.shape != (3,):
        raise ValueError("iota1 expects a 3-vector")
    out = np.zeros((3, 3))
    out[0, 2] = out[2, 0] = a[0]
    out[1, 2] = out[2, 1] = a[1]
    out[2, 2] = a[2]
    return out


# index split of the 6-Voigt components into in-plane (11, 22, 12) and
# transverse (33, 23, 13) groups; transverse ones are spanned by iota1
_INPLANE = np.array([0, 1, 5])
_TRANSVERSE = np.array([2, 3, 4])


def reduced_tensor(C: np.ndarray) -> np.ndarray:
    """Pointwise transverse-strain elimination: the 3x3 Voigt matrix of
    A |-> min_d C[iota(A) + iota1(d)] : [iota(A) + iota1(d)].

    Computed as the Schur complement of the transverse block. Raises if the
    transverse block is singular (would violate coercivity).
    """
    C = np.asarray(C, dtype=float)
    if C.shape != (6, 6):
        raise ValueError("reduced_tensor expects a 6x6 Voigt matrix")
    Cpp = C[np.ix_(_INPLANE, _INPLANE)]
    Cpq = C[np.ix_(_INPLANE, _TRANSVERSE)]
    Cqq = C[np.ix_(_TRANSVERSE, _TRANSVERSE)]
    if np.linalg.cond(Cqq) > 1e12:
        raise ValueError("singular transverse block: tensor is not coercive")
    Cr = Cpp - Cpq @ np.linalg.solve(Cqq, Cpq.T)
    return 0.5 * (Cr + Cr.T)


def c0_red(C0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Membrane/bending split of the transverse-reduced inclusion tensor:
    (C0^r, C0^r / 12).  The 1/12 is the second x3-moment of the through-
    thickness profile."""
    memb = reduced_tensor(C0)
    return memb, memb / 12.0


@dataclass
class CoercivityReport:
    passed: bool
    min_eig: float
    max_eig: float
    lower_margin: float   # min_eig - nu
    upper_margin: float   # 1/nu - max_eig (diagnostic only)
    upper_ok: bool


def check_coercivity(C: np.ndarray, nu: float) -> CoercivityReport:
    """Compare tensor eigenvalues against the coercivity constant nu.

    The verdict keys on the lower (coercivity) bound nu <= min_eig with
    min_eig > 0; the comparison of max_eig against 1/nu is reported as a
    diagnostic margin.
    """
    eigs = np.linalg.eigvalsh(mandel(np.asarray(C, dtype=float)))
    lo, hi = float(eigs[0]), float(eigs[-1])
    upper_margin = (1.0 / nu - hi) if nu > 0 else -np.inf
    passed = lo > 0.0 and lo >= nu
    return CoercivityReport(passed=passed, min_eig=lo, max_eig=hi,
                            lower_margin=lo - nu, upper_margin=upper_margin,
                            upper_ok=upper_margin >= 0.0)


@dataclass
class MaterialSpec:
    """Physical input: stiff/soft elasticity tensors, densities, coercivity.

    C0 is the (unscaled) soft-inclusion tensor; the high-contrast factor
    mu_h^2 is applied by the fine-scale oracle, never stored here.
    """
    C0: np.ndarray
    C1: np.ndarray
    rho0: float = 1.0
    rho1: float = 1.0
    nu: float = 0.1

    def __post_init__(self):
        self.C0 = np.asarray(self.C0, dtype=float)
        self.C1 = np.asarray(self.C1, dtype=float)
        for name, C in (("C0", self.C0), ("C1", self.C1)):
            if C.shape != (6, 6):
                raise ValueError(f"{name} must be a 6x6 Voigt matrix")
            if not np.allclose(C, C.T, atol=1e-12 * max(1.0, abs(C).max())):
                raise ValueError(f"{name} must be symmetric")
        if self.rho0 <= 0 or self.rho1 <= 0:
            raise ValueError("densities must be positive")
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        for name, C in (("C0", self.C0), ("C1", self.C1)):
            if not check_coercivity(C, self.nu).passed:
                raise ValueError(f"{name} fails the coercivity check at nu={self.nu}")

    def planar_symmetric(self, tol: float = 1e-12) -> bool:
        """True when both tensors are invariant under the x3 -> -x3
        reflection (C_ijk3 = C_i333 = 0 for in-plane i,j,k): no coupling
        between the {11, 22, 33, 12} and {23, 13} Voigt groups."""
        even, odd = [0, 1, 2, 5], [3, 4]
        for C in (self.C0, self.C1):
            if abs(C[np.ix_(even, odd)]).max() > tol * max(1.0, abs(C).max()):
                return False
        return True


def _voigt_from_upper(entries) -> np.ndarray:
    vals = list(entries)
    if len(vals) != 21:
        raise ValueError("expected 21 upper-triangle Voigt entries")
    C = np.zeros((6, 6))
    k = 0
    for i in range(6):
        for j in range(i, 6):
            C[i, j] = C[j, i] = vals[k]
            k += 1
    return C


def _tensor_from_json(node) -> np.ndarray:
    if isinstance(node, dict) and "isotropic" in node:
        iso = node["isotropic"]
        return isotropic(float(iso["lambda"]), float(iso["mu"]))
    return _voigt_from_upper(node)


def material_from_dict(d: dict) -> MaterialSpec:
    return MaterialSpec(
        C0=_tensor_from_json(d["C0"]),
        C1=_tensor_from_json(d["C1"]),
        rho0=float(d.get("rho0", 1.0)),
        rho1=float(d.get("rho1", 1.0)),
        nu=float(d.get("nu", 0.1)),
    )


def load_material(path) -> MaterialSpec:
    """Read a material JSON file ({"C0": ..., "C1": ..., "rho0": ..., ...})."""
    with open(path) as fh:
        return material_from_dict(json.load(fh))
