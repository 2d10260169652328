import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from periodic_blasso.operators import GreensFunction, OperatorSpec, green_eval_closed_form
from periodic_blasso.sampling import (SampleSet, SparseMeasure, add_noise, adjoint_eval,
                                      forward, matrix_G, matrix_H, noise_level,
                                      random_sparse_measure, sample_positions, torus_distance)

TWO_PI = 2 * math.pi
finite = st.floats(-1e3, 1e3, allow_nan=False)


class TestSparseMeasure:
    def test_reduced_and_sorted(self):
        m = SparseMeasure([7.0, -1.0, 2.0], [1.0, 2.0, 3.0])
        np.testing.assert_allclose(m.knots, np.sort(np.mod([7.0, -1.0, 2.0], TWO_PI)))
        assert np.all((m.knots >= 0) & (m.knots < TWO_PI))

    def test_duplicates_merge(self):
        m = SparseMeasure([1.0, 1.0 + TWO_PI, 2.0], [0.5, 0.25, -1.0])
        assert len(m) == 2
        np.testing.assert_allclose(m.weights, [0.75, -1.0])
        assert m.tv_norm == pytest.approx(1.75)

    def test_tiny_negative_knot_stays_in_range(self):
        m = SparseMeasure([-1e-18], [1.0])
        assert 0 <= m.knots[0] < TWO_PI

    def test_immutable(self):
        m = SparseMeasure([1.0], [2.0])
        with pytest.raises(ValueError):
            m.weights[0] = 3.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            SparseMeasure([1.0, 2.0], [1.0])

    def test_pruned(self):
        m = SparseMeasure([1.0, 2.0, 3.0], [1e-12, -0.5, 0.0]).pruned()
        np.testing.assert_array_equal(m.knots, [2.0])

    def test_csv_round_trip(self):
        m = random_sparse_measure(5, 7)
        text = m.to_csv()
        assert text.splitlines()[0] == "knot,weight"
        back = SparseMeasure.from_csv(text)
        np.testing.assert_array_equal(back.knots, m.knots)
        np.testing.assert_array_equal(back.weights, m.weights)

    def test_csv_empty_and_bad_header(self):
        assert len(SparseMeasure.from_csv("knot,weight\n")) == 0
        with pytest.raises(ValueError):
            SparseMeasure.from_csv("t,w\n1,2\n")

    def test_fourier_coefficients(self):
        m = SparseMeasure([1.0, 4.0], [2.0, -1.0])
        c = m.fourier_coefficients(3)
        n = np.arange(-3, 4)
        expected = 2 * np.exp(-1j * n * 1.0) - np.exp(-1j * n * 4.0)
        np.testing.assert_allclose(c, expected)
        np.testing.assert_allclose(c[::-1], np.conj(c))

    @given(arrays(float, 4, elements=st.floats(0, 6.28)), arrays(float, 4, elements=finite))
    def test_tv_norm_is_l1(self, knots, weights):
        m = SparseMeasure(knots, weights)
        assert m.tv_norm == pytest.approx(np.abs(m.weights).sum(), rel=1e-12)
        # merging can only cancel mass
        assert m.tv_norm <= np.abs(weights).sum() * (1 + 1e-12) + 1e-12
        if len(m) == 4:
            assert m.tv_norm == pytest.approx(np.abs(weights).sum(), rel=1e-12, abs=1e-12)


class TestSampleSet:
    def test_validation(self):
        with pytest.raises(ValueError):
            SampleSet([], [])
        with pytest.raises(ValueError):
            SampleSet([1.0, 2.0], [1.0])
        with pytest.raises(ValueError):
            SampleSet([1.0, 1.0 + TWO_PI], [1.0, 2.0])

    def test_csv_round_trip(self):
        s = SampleSet([0.5, 1.5, 2.5], [1.0, -2.0, 1e-17])
        text = s.to_csv()
        assert text.splitlines()[0] == "theta,y"
        back = SampleSet.from_csv(text)
        np.testing.assert_array_equal(back.values, s.values)
        np.testing.assert_array_equal(back.positions, s.positions)


class TestMatrices:
    def test_single_knot_zero_shift(self, exp_green):
        H = matrix_H([1.3], [1.3], exp_green)
        assert H[0, 0] == pytest.approx(exp_green(0.0))

    def test_square_case_constant_diagonal(self, exp_green):
        pos = sample_positions(6, 3)
        H = matrix_H(pos, pos, exp_green)
        np.testing.assert_allclose(np.diag(H), exp_green(0.0))

    def test_entries_pointwise(self, exp_green):
        rng = np.random.default_rng(4)
        th, k = rng.uniform(0, TWO_PI, 3), rng.uniform(0, TWO_PI, 2)
        H = matrix_H(th, k, exp_green)
        for i in range(3):
            for j in range(2):
                assert H[i, j] == pytest.approx(
                    float(green_eval_closed_form(3.0, 2, TWO_PI, th[i] - k[j])), rel=1e-13)

    def test_G_structure(self, exp_green, exp_spec):
        pos = np.array([0.0, 0.7, 3.1])
        M = 4
        G = matrix_G(pos, M, exp_green.symbol, exp_spec)
        psi_hat = exp_green.symbol.green_coefficients(exp_spec.period, M)
        np.testing.assert_allclose(G[:, M], psi_hat[M])
        np.testing.assert_allclose(G[0], psi_hat)
        n = np.arange(-M, M + 1)
        explicit = np.diag(np.exp(-1j * M * pos)) @ np.vander(np.exp(1j * pos), 2 * M + 1,
                                                               increasing=True) @ np.diag(psi_hat)
        np.testing.assert_allclose(G, explicit, atol=1e-14, rtol=0)
        direct = psi_hat[None, :] * np.exp(1j * np.outer(pos, n))
        np.testing.assert_allclose(G, direct, atol=1e-14)

    def test_G_rejects_large_order(self, exp_spec):
        g = GreensFunction(exp_spec, cutoff=8)
        with pytest.raises(ValueError):
            matrix_G([0.1], 9, g.symbol, exp_spec)

    def test_fourier_and_spatial_models_agree(self, exp_green, exp_spec):
        m = random_sparse_measure(3, 11)
        pos = sample_positions(25, 12)
        G = matrix_G(pos, 2048, exp_green.symbol, exp_spec)
        Gm = G @ m.fourier_coefficients(2048)
        np.testing.assert_allclose(Gm.imag, 0, atol=1e-10)
        assert np.max(np.abs(Gm - forward(m, pos, exp_green))) < 1e-3

    def test_convention_error_decreases_with_order(self, exp_green, exp_spec):
        m = random_sparse_measure(3, 2)
        pos = sample_positions(25, 3)
        Hb = forward(m, pos, exp_green)
        err = [np.max(np.abs(matrix_G(pos, M, exp_green.symbol, exp_spec)
                             @ m.fourier_coefficients(M) - Hb)) for M in (32, 256, 2048)]
        assert err[0] > err[1] > err[2]


class TestForwardAdjoint:
    def test_empty_measure(self, exp_green):
        np.testing.assert_array_equal(forward(SparseMeasure.empty(), [0.1, 0.2], exp_green), 0)

    def test_single_innovation_is_column(self, exp_green):
        pos = sample_positions(5, 0)
        np.testing.assert_allclose(forward(SparseMeasure([2.0], [1.0]), pos, exp_green),
                                   matrix_H(pos, [2.0], exp_green)[:, 0])

    def test_matches_matrix(self, exp_green):
        m = random_sparse_measure(4, 9)
        pos = sample_positions(17, 10)
        np.testing.assert_allclose(forward(m, pos, exp_green),
                                   matrix_H(pos, m.knots, exp_green) @ m.weights, atol=1e-12)

    def test_adjoint_basic(self, exp_green):
        pos = sample_positions(4, 1)
        assert adjoint_eval(np.zeros(4), pos, exp_green, 1.0) == 0
        e1 = np.eye(4)[0]
        assert adjoint_eval(e1, pos, exp_green, 1.0) == pytest.approx(
            float(exp_green(pos[0] - 1.0)))

    def test_adjoint_vectorised(self, exp_green):
        pos = sample_positions(4, 1)
        p = np.arange(4.0)
        t = np.array([[0.1, 0.2], [3.0, 5.0]])
        out = adjoint_eval(p, pos, exp_green, t)
        assert out.shape == (2, 2)
        assert out[1, 0] == pytest.approx(adjoint_eval(p, pos, exp_green, 3.0))

    def test_duality_pairing(self, exp_green):
        rng = np.random.default_rng(0)
        for trial in range(100):
            m = random_sparse_measure(3, trial)
            pos = sample_positions(9, 500 + trial)
            p = rng.standard_normal(9)
            lhs = forward(m, pos, exp_green) @ p
            rhs = m.weights @ adjoint_eval(p, pos, exp_green, m.knots)
            assert abs(lhs - rhs) < 1e-10

    @given(st.floats(-20, 20))
    def test_shift_covariance(self, s):
        green = GreensFunction(OperatorSpec("exponential", 3, 2))
        m = random_sparse_measure(3, 5)
        pos = sample_positions(9, 6)
        np.testing.assert_allclose(forward(m.shifted(s), pos + s, green),
                                   forward(m, pos, green), atol=1e-10)


class TestRandomGeneration:
    def test_deterministic(self):
        a, b = random_sparse_measure(4, 42), random_sparse_measure(4, 42)
        np.testing.assert_array_equal(a.knots, b.knots)
        np.testing.assert_array_equal(a.weights, b.weights)
        assert len(a) == 4

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            random_sparse_measure(0, 1)

    def test_knot_mean(self):
        knots = np.array([random_sparse_measure(1, s).knots[0] for s in range(10_000)])
        se = TWO_PI / math.sqrt(12) / math.sqrt(knots.size)
        assert abs(knots.mean() - math.pi) < 3 * se

    def test_positions(self):
        pos = sample_positions(9, 1)
        assert pos.size == 9 and np.all(np.diff(pos) > 0)
        np.testing.assert_allclose(sample_positions(4, 0, 1.0, "equispaced"), [0, .25, .5, .75])
        with pytest.raises(ValueError):
            sample_positions(4, 0, mode="sobol")
        with pytest.raises(ValueError):
            sample_positions(0, 0)


class TestNoise:
    def test_level_formula(self):
        assert noise_level([1.0, -2.0], 20) == pytest.approx(2 * math.exp(-2))

    def test_infinite_psnr_is_clean(self):
        clean = np.array([1.0, -3.0])
        np.testing.assert_array_equal(add_noise(clean, math.inf, 0), clean)

    def test_deterministic_and_std(self):
        clean = np.zeros(100_000)
        clean[0] = 1.0
        a = add_noise(clean, 10, 3)
        np.testing.assert_array_equal(a, add_noise(clean, 10, 3))
        omega = math.exp(-1)
        assert np.std(a[1:]) == pytest.approx(omega, rel=1e-2)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            add_noise([], 20, 0)

    def test_torus_distance(self):
        assert torus_distance(0.1, TWO_PI - 0.1, TWO_PI) == pytest.approx(0.2)
