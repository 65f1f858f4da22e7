import math

import numpy as np
import pytest

from offgrid import solver as S
from offgrid.kernels import KernelModel
from offgrid.measures import (DiscreteMeasure, MixtureParams, lq_norm,
                              mixed_norm, prediction_error, synthesize)


def mixture(B, theta, nu):
    return MixtureParams.build(np.asarray(B, dtype=float),
                               np.asarray(theta, dtype=float), nu)


@pytest.fixture(scope="module")
def setup(wide_dic):
    return wide_dic, KernelModel(wide_dic)


class TestObjective:
    def test_zero_coefficients(self, setup, nu3):
        dic, km = setup
        rng = np.random.default_rng(0)
        Y = rng.normal(size=(3, dic.T))
        got = S.objective(Y, np.zeros((3, 1)), [0.0], dic, nu3, 0.5, 2.0)
        lt2 = float(np.einsum("z,zt,zt->", nu3.weights, Y, Y))
        assert got == pytest.approx(lt2 / (2 * nu3.mass))

    def test_zero_residual(self, setup, nu3):
        dic, km = setup
        truth = mixture([[1.0, -2.0]] * 3, [-1.0, 1.2], nu3)
        Y = synthesize(truth, dic, nu3).data
        kappa = 0.3
        got = S.objective(Y, truth.B, truth.theta, dic, nu3, kappa, 1.5)
        assert got == pytest.approx(kappa * mixed_norm(truth.B, nu3, 1.5), abs=1e-12)

    def test_term_by_term_oracle(self, setup, nu3):
        dic, km = setup
        rng = np.random.default_rng(4)
        B = rng.normal(size=(3, 2))
        theta = np.array([-0.7, 0.9])
        Y = rng.normal(size=(3, dic.T))
        kappa, p = 0.17, 2.0
        # direct summation, scalar loops
        fid = 0.0
        for z in range(3):
            row = Y[z].copy()
            for k in range(2):
                raw = dic.eval(theta[k])
                row = row - B[z, k] * raw / np.linalg.norm(raw)
            fid += nu3.weights[z] * float(row @ row)
        pen = sum((nu3.weights @ np.abs(B[:, k]) ** p) ** (1 / p) for k in range(2))
        expected = fid / (2 * nu3.mass) + kappa * pen
        assert S.objective(Y, B, theta, dic, nu3, kappa, p) == pytest.approx(
            expected, rel=1e-12)


class TestDualSup:
    def test_zero_residual(self, setup, nu3):
        dic, km = setup
        val, _ = S.dual_sup(np.zeros((3, dic.T)), km, nu3, 2.0, 0.05)
        assert val == 0.0

    def test_single_feature(self, setup):
        dic, km = setup
        nu1 = DiscreteMeasure.counting(1)
        t0 = 0.37
        R = dic.features(np.array([t0]))
        val, arg = S.dual_sup(R, km, nu1, 2.0, 0.05)
        assert val == pytest.approx(1.0, abs=1e-9)
        assert km.dist(arg, t0) < 1e-6

    def test_matches_refined_grid_scan(self, setup):
        dic, km = setup
        nu2 = DiscreteMeasure.counting(2)
        R = np.vstack([dic.features(np.array([-0.4]))[0],
                       dic.features(np.array([0.4]))[0]])
        val, _ = S.dual_sup(R, km, nu2, 2.0, 0.1)
        th, _, _ = km.arclength_grid(0.01)
        feats = dic.features(th)
        brute = float(np.max(lq_norm(feats @ R.T, nu2, 2.0)))
        assert val >= brute - 1e-9
        assert val == pytest.approx(brute, abs=1e-4)


class TestGroupProx:
    def test_threshold_region_p2(self):
        nu = DiscreteMeasure.counting(2)
        B = np.array([[0.3], [0.4]])  # group norm 0.5 <= threshold
        out = S.group_prox_step(B, np.zeros_like(B), 1.0, 0.6, 2.0, nu)
        assert np.all(out == 0.0)

    def test_block_soft_threshold_value(self):
        nu = DiscreteMeasure.counting(2)
        B = np.array([[3.0], [4.0]])
        out = S.group_prox_step(B, np.zeros_like(B), 1.0, 1.0, 2.0, nu)
        assert np.allclose(out, [[2.4], [3.2]])

    def test_entrywise_p1(self):
        nu = DiscreteMeasure.counting(1)
        B = np.array([[0.5]])
        out = S.group_prox_step(B, np.zeros_like(B), 1.0, 1.0, 1.0, nu)
        assert out[0, 0] == 0.0
        out2 = S.group_prox_step(np.array([[2.0]]), np.zeros((1, 1)), 1.0, 1.0,
                                 1.0, nu)
        assert out2[0, 0] == pytest.approx(1.0)

    def test_p1_weights_scale_threshold(self):
        nu = DiscreteMeasure.from_weights([2.0, 0.5])
        B = np.array([[1.0], [1.0]])
        out = S.group_prox_step(B, np.zeros_like(B), 1.0, 0.6, 1.0, nu)
        assert out[0, 0] == 0.0                       # threshold 1.2 kills it
        assert out[1, 0] == pytest.approx(0.7)        # threshold 0.3


class TestFitGroups:
    def test_kkt_certified(self, setup, nu3):
        dic, km = setup
        rng = np.random.default_rng(2)
        theta = np.array([-1.5, 0.2, 1.9])
        truth = mixture(rng.normal(size=(3, 3)), theta, nu3)
        Y = synthesize(truth, dic, nu3).data + 0.05 * rng.standard_normal((3, dic.T))
        for p in (1.0, 2.0):
            B = S.fit_groups(Y, theta, km, nu3, 0.05, p, max_iters=20000,
                             tol_dual=1e-8)
            Phi = dic.features(theta)
            G = km.cov_gram(0, 0, theta)
            Cm = Y @ Phi.T
            assert S.kkt_residual(B, G, Cm, nu3, 0.05 * nu3.mass, p) <= 1e-6


class TestRefineTheta:
    def test_stationary_unchanged(self, setup, nu3):
        dic, km = setup
        truth = mixture([[1.0], [0.8], [1.2]], [0.4], nu3)
        Y = synthesize(truth, dic, nu3).data
        out = S.refine_theta(Y, truth.B, truth.theta, dic, nu3)
        assert abs(out[0] - 0.4) < 1e-10

    def test_moves_toward_truth(self, setup, nu3):
        dic, km = setup
        truth = mixture([[1.0], [0.8], [1.2]], [0.4], nu3)
        Y = synthesize(truth, dic, nu3).data
        start = np.array([0.5])
        fid0 = S.objective(Y, truth.B, start, dic, nu3, 1e-9, 2.0)
        out = S.refine_theta(Y, truth.B, start, dic, nu3, halfwidth=0.2)
        fid1 = S.objective(Y, truth.B, out, dic, nu3, 1e-9, 2.0)
        assert abs(out[0] - 0.4) < abs(start[0] - 0.4)
        assert fid1 < fid0

    def test_boundary_atom_stays(self, setup, nu3):
        dic, km = setup
        # truth outside the domain: gradient points outward at the boundary
        raw = dic._raw_value(np.array([3.0 + 0.2]))  # synthetic target past hi
        Y = np.tile(raw / np.linalg.norm(raw), (3, 1))
        B = np.ones((3, 1))
        out = S.refine_theta(Y, B, np.array([dic.domain.hi]), dic, nu3,
                             halfwidth=0.3)
        assert out[0] >= dic.domain.hi - 1e-6


class TestSolve:
    def test_zero_observation(self, setup, nu3):
        dic, km = setup
        cfg = S.SolverConfig(kappa=0.1, p=2.0, K_max=3)
        est, trace = S.solve(np.zeros((3, dic.T)), dic, nu3, cfg, model=km)
        assert est.s == 0
        assert trace.converged
        assert trace.objectives[-1] == 0.0

    def test_noiseless_single_atom(self, setup, nu3):
        dic, km = setup
        truth = mixture([[1.0], [0.8], [1.2]], [0.37], nu3)
        Y = synthesize(truth, dic, nu3).data
        cfg = S.SolverConfig(kappa=1e-8, p=2.0, K_max=4, insertion_grid_step=0.05)
        est, trace = S.solve(Y, dic, nu3, cfg, model=km)
        assert km.dist(est.theta[0], 0.37) <= 1e-3
        scale = math.sqrt(float(np.einsum("z,zt,zt->", nu3.weights, Y, Y)) / nu3.mass)
        assert prediction_error(est, truth, dic, nu3) / scale <= 1e-6

    def test_noiseless_two_atoms_objective_bound(self, setup, nu3):
        dic, km = setup
        truth = mixture([[1.0, -0.6], [0.8, 1.1], [1.2, 0.5]], [-1.4, 1.3], nu3)
        Y = synthesize(truth, dic, nu3).data
        kappa = 1e-8
        cfg = S.SolverConfig(kappa=kappa, p=2.0, K_max=5, insertion_grid_step=0.05)
        est, trace = S.solve(Y, dic, nu3, cfg, model=km)
        assert len(est.support) == 2
        plug_in = kappa * mixed_norm(truth.B, nu3, 2.0)
        assert trace.objectives[-1] <= plug_in * (1 + 1e-6)

    def test_monotone_trace(self, setup, nu3):
        dic, km = setup
        rng = np.random.default_rng(8)
        truth = mixture(rng.normal(size=(3, 2)), [-1.0, 1.5], nu3)
        Y = synthesize(truth, dic, nu3).data + 0.05 * rng.standard_normal((3, dic.T))
        cfg = S.SolverConfig(kappa=0.03, p=2.0, K_max=5, insertion_grid_step=0.05,
                             tol_dual=1e-3)
        est, trace = S.solve(Y, dic, nu3, cfg, model=km)
        assert all(b <= a for a, b in zip(trace.objectives, trace.objectives[1:]))

    def test_permutation_invariance(self, setup, nu3):
        dic, km = setup
        B = np.array([[1.0, -0.6], [0.8, 1.1], [1.2, 0.5]])
        th = np.array([-1.4, 1.3])
        t1 = mixture(B, th, nu3)
        t2 = mixture(B[:, ::-1], th[::-1], nu3)
        Y = synthesize(t1, dic, nu3).data
        cfg = S.SolverConfig(kappa=1e-8, p=2.0, K_max=4, insertion_grid_step=0.05)
        est, _ = S.solve(Y, dic, nu3, cfg, model=km)
        assert prediction_error(est, t1, dic, nu3) == pytest.approx(
            prediction_error(est, t2, dic, nu3), abs=1e-12)

    def test_p1_equals_p2_single_signal(self, setup):
        # with n = 1 and unit weight the two penalties coincide
        dic, km = setup
        nu1 = DiscreteMeasure.counting(1)
        rng = np.random.default_rng(12)
        truth = mixture([[1.0, -0.7]], [-1.2, 1.6], nu1)
        Y = synthesize(truth, dic, nu1).data + 0.03 * rng.standard_normal((1, dic.T))
        kappa = 0.05
        res = {}
        for p in (1.0, 2.0):
            cfg = S.SolverConfig(kappa=kappa, p=p, K_max=4,
                                 insertion_grid_step=0.05, tol_dual=1e-6)
            est, _ = S.solve(Y, dic, nu1, cfg, model=km)
            res[p] = S.objective(Y, est.B, est.theta, dic, nu1, kappa, 2.0)
        assert res[1.0] == pytest.approx(res[2.0], abs=1e-8)

    def test_trace_csv(self, tmp_path, setup, nu3):
        dic, km = setup
        truth = mixture([[1.0], [0.8], [1.2]], [0.0], nu3)
        Y = synthesize(truth, dic, nu3).data
        cfg = S.SolverConfig(kappa=0.01, p=2.0, K_max=3, insertion_grid_step=0.05)
        _, trace = S.solve(Y, dic, nu3, cfg, model=km)
        path = tmp_path / "trace.csv"
        trace.to_csv(path)
        assert path.read_text().splitlines()[0] == "iter,objective,event,dual_sup"

    def test_config_validation(self):
        with pytest.raises(ValueError):
            S.SolverConfig(kappa=0.0)
        with pytest.raises(ValueError):
            S.SolverConfig(kappa=1.0, p=1.5)
        with pytest.raises(ValueError):
            S.SolverConfig(kappa=1.0, K_max=0)
