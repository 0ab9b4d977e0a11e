import numpy as np
import pytest
import scipy.sparse.linalg as spla
from numpy.testing import assert_allclose
from scipy.integrate import trapezoid

from hcplate.evolution import (_bending_kron_system,
                               _macro_modal_reduction, _real_time_system,
                               evolve, evolve_memory_bending)
from hcplate.geometry import build_macro_mesh
from hcplate.limits import (LoadSpec, RegimeConfig, RegimeError,
                            build_limit_model, solve_bending_resolvent_data)
from hcplate.macro import macro_eigs


@pytest.fixture(scope="module")
def mm():
    return build_macro_mesh(1.0, 1.0, 4, 4)


@pytest.fixture(scope="module")
def model_r1(demo_material, demo_shape, mm):
    return build_limit_model(RegimeConfig(1.0, "eps", 2), demo_material,
                             demo_shape, mm, cell_n=8, n_z=4, n_modes=8)


@pytest.fixture(scope="module")
def model_r3(demo_material, demo_shape, mm):
    return build_limit_model(RegimeConfig(1.0, "eps_h", 2), demo_material,
                             demo_shape, mm, cell_n=8, n_z=4, n_modes=8)


@pytest.fixture(scope="module")
def model_r2(demo_material, demo_shape, mm):
    return build_limit_model(RegimeConfig(1.0, "eps", 0), demo_material,
                             demo_shape, mm, cell_n=8, n_z=4, n_modes=8)


def zero_load():
    return LoadSpec(amplitude=(0.0, 0.0, 0.0))


class TestSingleMode:
    def test_cos_solution_and_dt2_order(self, model_r1):
        mu, W = macro_eigs(model_r1.bend_op, 1)
        w1 = W[:, 0]
        T = 2 * np.pi / np.sqrt(mu[0])
        errs = []
        for dt in (T / 200, T / 400):
            traj = evolve(model_r1, "long_time_bending", zero_load(), T, dt,
                          u0=w1.copy(), v0=np.zeros_like(w1))
            proj = traj.fields["b"] @ (model_r1.rho_bar *
                                       (model_r1.bend_op.pair.M @ w1))
            errs.append(abs(proj - np.cos(np.sqrt(mu[0]) * traj.times)).max())
        ratio = errs[0] / errs[1]
        assert 3.5 <= ratio <= 4.5

    def test_quasistatic_membrane_tracks_bending(self, model_r1):
        mu, W = macro_eigs(model_r1.bend_op, 1)
        traj = evolve(model_r1, "long_time_bending", zero_load(),
                      0.3, 1e-3, u0=W[:, 0], v0=np.zeros(model_r1.bend_op.n))
        aq = traj.meta["a_quasistatic"]
        op = model_r1.bend_op
        lu = op.membrane_lu()
        for j in (0, len(traj.times) // 2, -1):
            expect = lu.solve(-(op.K_cross @ traj.fields["b"][j]))
            assert_allclose(aq[j], expect, atol=1e-12)


class TestConservation:
    def test_free_energy_constant_bending(self, model_r3):
        system = _bending_kron_system(model_r3, zero_load())
        mu, W = _macro_modal_reduction(model_r3, 1)
        u0 = np.zeros(system.n)
        u0[:model_r3.bend_op.pair.n] = W[:, 0]
        traj = evolve(model_r3, "strong_hc_bending", zero_load(), 1.0, 1e-3,
                      u0=u0, v0=np.zeros(system.n))
        assert traj.energy_drift() <= 1e-10

    def test_free_energy_constant_real_time(self, model_r2):
        system = _real_time_system(model_r2, zero_load())
        rng = np.random.RandomState(7)
        u0 = 0.1 * rng.standard_normal(system.n)
        traj = evolve(model_r2, "real_time", zero_load(), 1.0, 1e-3,
                      u0=u0, v0=np.zeros(system.n))
        assert traj.energy_drift() <= 1e-10

    def test_energy_inequality_with_loads(self, model_r3):
        # sqrt(E(t)) <= e^t (sqrt(E0) + int ||f||_{M^-1}); the generator
        # bound allows the exponential, the quadrature the rest
        ld = LoadSpec(amplitude=(0, 0, 1.0), time=lambda t: np.sin(3 * t))
        system = _bending_kron_system(model_r3, ld)
        traj = evolve(model_r3, "strong_hc_bending", ld, 1.0, 1e-3)
        Minv_F = spla.splu(system.M.tocsc()).solve(system.F0)
        fnorm = np.sqrt(system.F0 @ Minv_F)
        for j in (100, 500, 1000):
            t = traj.times[j]
            rhs = np.exp(t) * (0.0 + fnorm * t)
            assert np.sqrt(traj.energy[j, 2]) <= rhs + 1e-12


class TestMemoryKernel:
    def test_agrees_with_coupled_solve(self, model_r3):
        system = _bending_kron_system(model_r3, zero_load())
        mu, W = _macro_modal_reduction(model_r3, 2)
        nb = model_r3.bend_op.pair.n
        u0 = np.zeros(system.n)
        u0[:nb] = 0.7 * W[:, 0] - 0.2 * W[:, 1]
        traj = evolve(model_r3, "strong_hc_bending", zero_load(), 1.0, 1e-3,
                      u0=u0, v0=np.zeros(system.n))
        times, modal = evolve_memory_bending(
            model_r3, zero_load(), 1.0, 1e-3, n_macro_modes=2,
            b0_modal=[0.7, -0.2])
        Mb = model_r3.bend_op.pair.M
        for k in range(2):
            proj = traj.fields["b"] @ (Mb @ W[:, k])
            assert abs(proj - modal[:, k]).max() <= 1e-6

    def test_forced_agreement(self, model_r3):
        ld = LoadSpec(amplitude=(0, 0, 1.0), time=lambda t: np.cos(2 * t))
        traj = evolve(model_r3, "strong_hc_bending", ld, 0.5, 5e-4)
        times, modal = evolve_memory_bending(model_r3, ld, 0.5, 5e-4,
                                             n_macro_modes=3)
        mu, W = _macro_modal_reduction(model_r3, 3)
        Mb = model_r3.bend_op.pair.M
        # the load has a component outside the 3-mode macro span; compare
        # only the projections driven by the projected load
        from hcplate.limits import load_moments
        fbar, _ = load_moments(model_r3, ld)
        Rb = model_r3.bend_rect()
        mac = model_r3.macro_nodal(ld)
        F = Rb @ (fbar[2] * mac)
        coeffs = W.T @ F
        # modes whose load projection dominates the residual participate
        for k in range(3):
            proj = traj.fields["b"] @ (Mb @ W[:, k])
            assert abs(proj - modal[:, k]).max() <= 1e-6 * max(1.0, abs(modal[:, k]).max())


class TestLaplaceConsistency:
    @pytest.mark.parametrize("lam", [2.0, 5.0])
    def test_resolvent_is_laplace_transform(self, model_r3, lam):
        system = _bending_kron_system(model_r3, zero_load())
        nb = model_r3.bend_op.pair.n
        N = len(model_r3.bloch.eigenvalues)
        mu, W = _macro_modal_reduction(model_r3, 1)
        u0 = np.zeros(system.n)
        u0[:nb] = W[:, 0]
        T, dt = 16.0 / lam, 1e-3
        traj = evolve(model_r3, "strong_hc_bending", zero_load(), T, dt,
                      u0=u0, v0=np.zeros(system.n))
        wts = np.exp(-lam * traj.times)
        integral = trapezoid(wts[:, None] * traj.fields["b"], traj.times,
                             axis=0)
        b_res, _ = solve_bending_resolvent_data(model_r3, lam ** 2,
                                                lam * u0[:nb],
                                                np.zeros((N, nb)))
        rel = np.linalg.norm(integral - b_res) / np.linalg.norm(b_res)
        assert rel <= 1e-4


class TestVariantDispatch:
    def test_variant_regime_mismatch(self, model_r2):
        with pytest.raises(RegimeError):
            evolve(model_r2, "strong_hc_bending", zero_load(), 0.1, 1e-2)

    def test_unknown_variant(self, model_r2):
        with pytest.raises(RegimeError):
            evolve(model_r2, "warp_drive", zero_load(), 0.1, 1e-2)

    def test_deltainf_real_time_needs_flat_profile(self, demo_material,
                                                   demo_shape, mm):
        model = build_limit_model(RegimeConfig(np.inf, "eps", 0),
                                  demo_material, demo_shape, mm, cell_n=8,
                                  n_modes=6)
        with pytest.raises(RegimeError):
            evolve(model, "real_time",
                   LoadSpec(amplitude=(1, 0, 0), transverse="x3"), 0.1, 1e-2)

    def test_delta0_hc_variant_runs(self, demo_material, demo_shape, mm):
        model = build_limit_model(RegimeConfig(0.0, "eps2", 2), demo_material,
                                  demo_shape, mm, cell_n=8, n_modes=6)
        traj = evolve(model, "delta0_hc", LoadSpec(amplitude=(0.2, 0, 1.0)),
                      0.05, 1e-3)
        assert traj.fields["b"].shape[0] == 51
        assert "micro_inplane" in traj.meta

    def test_nonpositive_dt(self, model_r2):
        with pytest.raises(ValueError):
            evolve(model_r2, "real_time", zero_load(), 0.1, -1e-3)
