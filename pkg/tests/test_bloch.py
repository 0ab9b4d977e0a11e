import numpy as np
import pytest
from numpy.testing import assert_allclose

from hcplate import tensors as tn
from hcplate.bloch import bloch_spectrum, strip_bottom_m0, strip_fiber_bottom
from hcplate.fem import assemble as fa
from hcplate.fem.system import EigWorkspace, eigs_smallest
from hcplate.geometry import build_cell_mesh


class TestPrismOperators:
    def test_eigenvalues_positive(self, demo_bloch_full):
        assert (demo_bloch_full.eigenvalues > 0).all()

    def test_m_orthonormal(self, demo_bloch_full):
        bs = demo_bloch_full
        G = bs.modes.T @ (bs.pair.M @ bs.modes)
        assert abs(G - np.eye(bs.n_modes)).max() < 1e-8

    def test_parity_union_equals_full(self, demo_material, demo_shape):
        full = bloch_spectrum(demo_material, demo_shape, 16, "full_delta", 12,
                              delta=1.0, n_z=4)
        memb = bloch_spectrum(demo_material, demo_shape, 16, "memb_delta", 12,
                              delta=1.0, n_z=4)
        bend = bloch_spectrum(demo_material, demo_shape, 16, "bend_delta", 12,
                              delta=1.0, n_z=4)
        union = np.sort(np.concatenate([memb.eigenvalues, bend.eigenvalues]))
        nf = full.n_modes
        assert_allclose(union[:nf], full.eigenvalues,
                        rtol=1e-8, atol=1e-8 * full.eigenvalues.max())

    def test_classification_by_symmetry(self, demo_bloch_memb):
        # the symmetric disk has both coupled and uncoupled membrane modes;
        # uncoupled ones have numerically zero means
        bs = demo_bloch_memb
        labels = set(bs.classification)
        assert labels == {"coupled", "uncoupled"}
        for i, lab in enumerate(bs.classification):
            if lab == "uncoupled":
                assert np.linalg.norm(bs.weighted_means[i]) <= \
                    1e-7 * bs.rho0_area_mass

    def test_dense_vs_iterative(self, demo_material, demo_shape):
        d = bloch_spectrum(demo_material, demo_shape, 12, "full_delta", 8,
                           delta=1.0, n_z=4, ws=EigWorkspace(solver="dense"))
        s = bloch_spectrum(demo_material, demo_shape, 12, "full_delta", 8,
                           delta=1.0, n_z=4,
                           ws=EigWorkspace(solver="shift-invert"))
        assert_allclose(d.eigenvalues, s.eigenvalues, rtol=1e-8)

    def test_too_many_modes(self, demo_material, demo_shape):
        with pytest.raises(ValueError):
            bloch_spectrum(demo_material, demo_shape, 8, "memb_delta0", 10 ** 6)


class TestCompleteness:
    def test_partial_sums_monotone_and_bounded(self, demo_bloch_full):
        bs = demo_bloch_full
        S = bs.gram_partial_sums()
        prev = np.zeros_like(S[0])
        for n in range(bs.n_modes):
            inc = np.linalg.eigvalsh(S[n] - prev)
            assert inc.min() > -1e-12
            prev = S[n]
        top = np.linalg.eigvalsh(S[-1])
        assert top.max() <= bs.rho0_mass * (1 + 1e-10)

    def test_trace_reaches_95_percent(self, demo_bloch_full):
        bs = demo_bloch_full
        S = bs.gram_partial_sums()
        n50 = min(50, bs.n_modes) - 1
        frac = np.trace(S[n50]) / (3 * bs.rho0_mass)
        assert frac >= 0.95

    def test_full_sum_closes_exactly(self, demo_material, demo_shape):
        # summing over the whole discrete spectrum recovers the clipped
        # constant's mass exactly (discrete Parseval identity)
        bs = bloch_spectrum(demo_material, demo_shape, 8, "memb_delta0", 1)
        n = bs.pair.n
        bs_all = bloch_spectrum(demo_material, demo_shape, 8, "memb_delta0", n)
        S = bs_all.gram_partial_sums()[-1]
        assert_allclose(S, bs_all.rho0_mass * np.eye(2), atol=1e-10)

    def test_scalar_gram_under_symmetry(self, demo_bloch_memb):
        # centered disk + isotropic material: the coupled-mode Gram matrix
        # is a multiple of the identity
        bs = demo_bloch_memb
        _, means = bs.coupled()
        G = means.T @ means
        assert abs(G[0, 0] - G[1, 1]) < 1e-6 * abs(G).max()
        assert abs(G[0, 1]) < 1e-6 * abs(G).max()


class TestDelta0Operators:
    def test_bend_twelfth_covariance(self, demo_material, demo_shape):
        bs = bloch_spectrum(demo_material, demo_shape, 16, "bend_delta0", 5)
        mesh = build_cell_mesh(demo_shape, n=16)
        pair = fa.assemble_bfs_h2(mesh, tn.reduced_tensor(demo_material.C0),
                                  density=demo_material.rho0,
                                  space="inclusion-clamped", restrict_to="soft")
        w, _ = eigs_smallest(pair, 5)
        assert_allclose(bs.eigenvalues[:5], w / 12.0, rtol=1e-8)

    def test_memb0_positive_spectrum(self, demo_material, demo_shape):
        bs = bloch_spectrum(demo_material, demo_shape, 16, "memb_delta0", 10)
        assert bs.eigenvalues[0] > 0
        assert bs.weighted_means.shape[1] == 2


class TestStrip:
    def test_eta0_matches_real_solve(self, demo_material, demo_shape):
        mesh = build_cell_mesh(demo_shape, n=12)
        a0 = strip_fiber_bottom(demo_material, mesh, 0.0)
        binf = bloch_spectrum(demo_material, demo_shape, 12, "full_deltainf", 1)
        assert_allclose(a0, binf.eigenvalues[0], rtol=1e-9)

    def test_curve_above_eta0_and_continuous(self, demo_material, demo_shape):
        mesh = build_cell_mesh(demo_shape, n=12)
        grid = np.linspace(0, 8, 9)
        m0, curve = strip_bottom_m0(demo_material, mesh, grid)
        vals = curve[:, 1]
        assert (vals - vals[0] >= -1e-9 * vals[0]).all()
        # Lipschitz sanity with a data-driven constant
        d = np.abs(np.diff(vals)) / np.diff(curve[:, 0])
        assert d.max() <= 10 * max(np.median(d), 1.0)

    def test_m0_not_above_curve(self, demo_material, demo_shape):
        mesh = build_cell_mesh(demo_shape, n=12)
        m0, curve = strip_bottom_m0(demo_material, mesh, np.linspace(0, 6, 7))
        assert m0 <= curve[:, 1].min() + 1e-12

    def test_empty_grid(self, demo_material, demo_shape):
        mesh = build_cell_mesh(demo_shape, n=12)
        with pytest.raises(ValueError):
            strip_bottom_m0(demo_material, mesh, [])

    def test_quadratic_lower_envelope(self, demo_material, demo_shape):
        # least-squares fit alpha ~ a + b eta^2 on the upper half has a, b > 0
        mesh = build_cell_mesh(demo_shape, n=12)
        grid = np.linspace(0, 12, 13)
        _, curve = strip_bottom_m0(demo_material, mesh, grid)
        upper = curve[len(grid) // 2:]
        Amat = np.column_stack([np.ones(len(upper)), upper[:, 0] ** 2])
        coef, *_ = np.linalg.lstsq(Amat, upper[:, 1], rcond=None)
        assert coef[0] > 0 and coef[1] > 0
