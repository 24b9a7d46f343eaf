import numpy as np
import pytest

from steelprop import svr
from steelprop.errors import ValidationError
from steelprop.svr import (KernelSpec, SvrParams, dual_objective, fit_svr,
                           kernel_eval, kernel_matrix, kkt_violation)

from oracles import (gaussian_kernel_loops, linear_kernel_loops,
                     poly_kernel_loops, svr_dual_objective, svr_dual_solve_pg)


class TestKernelEval:
    def test_gaussian_zero_distance(self):
        spec = KernelSpec(kind="gaussian", gamma=0.7)
        x = np.array([1.0, -2.0, 3.0])
        assert kernel_eval(spec, x, x) == 1.0

    def test_linear_dot(self):
        spec = KernelSpec(kind="linear")
        assert kernel_eval(spec, np.array([1.0, 2.0]), np.array([3.0, 4.0])) == 11.0

    def test_polynomial(self):
        spec = KernelSpec(kind="polynomial", degree=2, coef0=1.0)
        assert kernel_eval(spec, np.array([1.0]), np.array([1.0])) == 4.0

    def test_arity_mismatch(self):
        with pytest.raises(ValidationError):
            kernel_eval(KernelSpec(kind="linear"), np.zeros(2), np.zeros(3))

    def test_matrix_matches_eval(self, rng):
        A = rng.normal(size=(6, 3))
        B = rng.normal(size=(4, 3))
        for spec in (KernelSpec(kind="linear"),
                     KernelSpec(kind="polynomial", degree=3, coef0=1.0),
                     KernelSpec(kind="gaussian", gamma=0.5)):
            K = kernel_matrix(spec, A, B)
            for a in range(6):
                for b in range(4):
                    assert K[a, b] == pytest.approx(
                        kernel_eval(spec, A[a], B[b]), rel=1e-12, abs=1e-15)

    def test_gaussian_gram_positive_semidefinite(self, rng):
        X = rng.normal(size=(50, 4))
        K = kernel_matrix(KernelSpec(kind="gaussian", gamma=0.8), X, X)
        assert np.allclose(K, K.T)
        eigs = np.linalg.eigvalsh(K)
        assert eigs.min() >= -1e-8


def toy_problem(rng, n=60, noise=0.0):
    X = rng.uniform(-1, 1, size=(n, 2))
    y = np.sin(2.0 * X[:, 0]) + 0.5 * X[:, 1]
    if noise:
        y = y + noise * rng.normal(size=n)
    return X, y


class TestFit:
    def test_constant_targets_all_inside_tube(self, rng):
        X = rng.uniform(-1, 1, size=(30, 3))
        y = np.full(30, 2.5)
        model = fit_svr(X, y, KernelSpec(kind="gaussian", gamma=0.5),
                        SvrParams(epsilon=0.1))
        assert len(model.coef) == 0
        assert model.bias == pytest.approx(2.5, abs=1e-12)
        assert np.allclose(model.predict(X), 2.5)
        assert kkt_violation(model, X, y) == 0.0

    def test_linear_kernel_recovers_slope(self, rng):
        n = 80
        x = rng.uniform(-1, 1, size=n)
        y = 3.0 * x + 0.01 * rng.uniform(-1, 1, size=n)
        X = x.reshape(-1, 1)
        model = fit_svr(X, y, KernelSpec(kind="linear"),
                        SvrParams(C=100.0, epsilon=0.1))
        lstsq_slope = float(x @ y / (x @ x))
        # slope of the fitted function between two probe points
        p = model.predict(np.array([[1.0], [-1.0]]))
        fitted_slope = float((p[0] - p[1]) / 2.0)
        assert abs(fitted_slope - lstsq_slope) <= 0.05 * abs(lstsq_slope)

    @pytest.mark.parametrize("spec", [
        KernelSpec(kind="linear"),
        KernelSpec(kind="polynomial", degree=2, coef0=1.0),
        KernelSpec(kind="gaussian", gamma=None),
    ])
    def test_kkt_satisfied_after_convergence(self, rng, spec):
        X, y = toy_problem(rng, n=200, noise=0.05)
        params = SvrParams(C=1.0, epsilon=0.1, tolerance=1e-3)
        model = fit_svr(X, y, spec, params)
        assert model.converged
        assert kkt_violation(model, X, y) <= params.tolerance

    def test_dual_box_constraint(self, rng):
        X, y = toy_problem(rng, n=120, noise=0.1)
        params = SvrParams(C=0.7, epsilon=0.05)
        model = fit_svr(X, y, KernelSpec(kind="gaussian", gamma=1.0), params)
        assert np.all(np.abs(model.coef) <= params.C + 1e-12)

    def test_tube_property_for_non_support_samples(self, rng):
        X, y = toy_problem(rng, n=150, noise=0.05)
        params = SvrParams(C=1.0, epsilon=0.1)
        model = fit_svr(X, y, KernelSpec(kind="gaussian", gamma=1.0), params)
        beta = np.zeros(len(y))
        beta[model.sv_index] = model.coef
        f = model.predict_scaled(X)
        inside = np.abs(f - y) <= params.epsilon + params.tolerance
        assert np.all(inside[beta == 0.0])

    def test_free_sv_prediction_on_tube_edge(self, rng):
        X, y = toy_problem(rng, n=150, noise=0.05)
        params = SvrParams(C=1.0, epsilon=0.1)
        model = fit_svr(X, y, KernelSpec(kind="gaussian", gamma=1.0), params)
        free = np.abs(model.coef) < params.C - 1e-12
        assert free.any()
        f = model.predict_scaled(model.support_vectors[free])
        gaps = np.abs(np.abs(f - y[model.sv_index][free]) - params.epsilon)
        assert np.max(gaps) <= params.epsilon + params.tolerance

    def test_non_convergence_is_warning_not_error(self, rng):
        X, y = toy_problem(rng, n=100, noise=0.3)
        with pytest.warns(RuntimeWarning, match="max_passes"):
            model = fit_svr(X, y, KernelSpec(kind="gaussian", gamma=1.0),
                            SvrParams(max_passes=3))
        assert not model.converged
        assert model.solver_gap > 0.0


class TestPredict:
    def test_zero_support_vectors_constant(self):
        model = svr.SvrModel(
            kernel=KernelSpec(kind="linear"), params=SvrParams(),
            support_vectors=np.zeros((0, 2)), coef=np.zeros(0),
            sv_index=np.zeros(0, dtype=np.int64), bias=4.5, n_train=0,
            converged=True, iterations=0, solver_gap=0.0)
        out = model.predict(np.array([[1.0, 2.0], [5.0, -1.0]]))
        assert np.all(out == 4.5)

    def test_matches_brute_force_kernel_sum(self, rng):
        X, y = toy_problem(rng, n=80)
        model = fit_svr(X, y, KernelSpec(kind="gaussian", gamma=0.9),
                        SvrParams(C=2.0, epsilon=0.05))
        probes = rng.uniform(-1, 1, size=(25, 2))
        got = model.predict(probes)
        for i, x in enumerate(probes):
            expected = model.bias
            for c, sv in zip(model.coef, model.support_vectors):
                expected += c * kernel_eval(model.kernel, sv, x)
            assert got[i] == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_arity_mismatch(self, rng):
        X, y = toy_problem(rng, n=30)
        model = fit_svr(X, y, KernelSpec(kind="linear"), SvrParams())
        with pytest.raises(ValidationError):
            model.predict(np.zeros((1, 7)))


class TestKktChecker:
    def test_zeroed_bias_breaks_kkt(self, rng):
        X, y = toy_problem(rng, n=120, noise=0.05)
        y = y + 3.0   # push targets away from zero so the bias matters
        params = SvrParams(C=1.0, epsilon=0.1)
        model = fit_svr(X, y, KernelSpec(kind="gaussian", gamma=1.0), params)
        assert kkt_violation(model, X, y) <= params.tolerance
        model.bias = 0.0
        assert kkt_violation(model, X, y) > params.tolerance


class TestDualObjectiveVsProjectedGradient:
    @pytest.mark.parametrize("kind", ["linear", "polynomial", "gaussian"])
    def test_smo_matches_pg_on_small_instance(self, rng, kind):
        X, y = toy_problem(rng, n=30, noise=0.1)
        C, eps = 1.0, 0.1
        spec = {"linear": KernelSpec(kind="linear"),
                "polynomial": KernelSpec(kind="polynomial", degree=2, coef0=1.0),
                "gaussian": KernelSpec(kind="gaussian", gamma=0.8)}[kind]
        model = fit_svr(X, y, spec, SvrParams(C=C, epsilon=eps, tolerance=1e-5))
        obj_smo = dual_objective(model, X, y)
        K_ref = {"linear": linear_kernel_loops(X),
                 "polynomial": poly_kernel_loops(X, 2, 1.0),
                 "gaussian": gaussian_kernel_loops(X, 0.8)}[kind]
        _, obj_pg = svr_dual_solve_pg(K_ref, y, C, eps)
        scale = max(abs(obj_pg), 1e-9)
        assert abs(obj_smo - obj_pg) <= 1e-3 * scale
        # SMO is the minimizer candidate: it must not be meaningfully worse
        assert obj_smo <= obj_pg + 1e-3 * scale

    def test_beta_objective_identity(self, rng):
        X, y = toy_problem(rng, n=40)
        model = fit_svr(X, y, KernelSpec(kind="gaussian", gamma=0.5),
                        SvrParams(C=1.5, epsilon=0.08))
        beta = np.zeros(len(y))
        beta[model.sv_index] = model.coef
        K = gaussian_kernel_loops(X, 0.5)
        assert dual_objective(model, X, y) == pytest.approx(
            svr_dual_objective(K, y, beta, 0.08), rel=1e-10)


class TestSerialization:
    def test_roundtrip(self, rng):
        from steelprop.dataset import fit_scaler
        X_raw = rng.uniform(0, 10, size=(50, 3))
        y_raw = X_raw[:, 0] * 50.0 + rng.normal(size=50)
        scaler = fit_scaler(X_raw, y_raw)
        model = fit_svr(scaler.transform(X_raw), scaler.transform_targets(y_raw),
                        KernelSpec(kind="gaussian"), SvrParams(), scaler=scaler)
        back = svr.deserialize(svr.serialize(model))
        probes = rng.uniform(0, 10, size=(8, 3))
        assert np.array_equal(back.predict(probes), model.predict(probes))
        assert back.kernel == model.kernel
        assert back.bias == model.bias

    def test_roundtrip_without_scaler(self, rng):
        X, y = toy_problem(rng, n=40)
        model = fit_svr(X, y, KernelSpec(kind="linear"), SvrParams())
        back = svr.deserialize(svr.serialize(model))
        assert np.array_equal(back.predict(X), model.predict(X))
