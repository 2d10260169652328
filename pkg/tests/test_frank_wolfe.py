import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import synthetic_samples
from oracles import golden_section
from periodic_blasso.fista import FistaConfig
from periodic_blasso.frank_wolfe import (CertificateGrid, FwConfig, FwState, Variant,
                                         certificate_argmax, certificate_eval, fw_gamma,
                                         fw_solve, lambda_base_fw, objective_eval)
from periodic_blasso.operators import green_eval_closed_form
from periodic_blasso.sampling import (SampleSet, SparseMeasure, forward, random_sparse_measure,
                                      sample_positions, torus_distance)

TWO_PI = 2 * math.pi


def random_state(green, seed, L=9):
    rng = np.random.default_rng(seed)
    pos = sample_positions(L, seed)
    samples = SampleSet(pos, rng.standard_normal(L))
    lam = rng.uniform(0.05, 2.0)
    state = FwState.initial(samples, lam)
    state.measure = random_sparse_measure(int(rng.integers(1, 4)), 1000 + seed)
    # any s with ||m||_TV <= s <= M is a valid lifted state
    state.s = min(state.M_bound, state.measure.tv_norm * rng.uniform(1, 1.5))
    spike = (rng.uniform(0, TWO_PI), float(rng.choice([-1.0, 1.0])))
    return samples, lam, state, spike


def lifted_objective(state, spike, samples, green, lam):
    """The step objective in exact rational arithmetic: in floating point the
    quadratic is too flat near its minimum to locate it to 1e-8."""
    t, sign = spike
    M = Fraction(state.M_bound)
    phi_m = [Fraction(v) for v in forward(state.measure, samples.positions, green)]
    phi_u = [Fraction(v) for v in
             forward(SparseMeasure([t], [sign * state.M_bound]), samples.positions, green)]
    y = [Fraction(v) for v in samples.values]
    s, lam = Fraction(state.s), Fraction(lam)

    def f(gamma):
        g = Fraction(gamma)
        r = [yl - (1 - g) * a - g * b for yl, a, b in zip(y, phi_m, phi_u)]
        return sum(x * x for x in r) + lam * ((1 - g) * s + g * M)

    return f


class TestConfig:
    @pytest.mark.parametrize("kwargs", [dict(lam=0.0), dict(lam=1.0, nu=0.0),
                                        dict(lam=1.0, grid_points=8), dict(lam=1.0, max_iter=0),
                                        dict(lam=1.0, step_rule="armijo"),
                                        dict(lam=1.0, variant="fancy")])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            FwConfig(**kwargs)

    def test_variant_from_string(self):
        assert FwConfig(1.0, variant="reweighted").variant is Variant.REWEIGHTED


class TestStep:
    def test_matches_golden_section(self, exp_green):
        for seed in range(100):
            samples, lam, state, spike = random_state(exp_green, seed)
            g = fw_gamma(state, spike, samples, exp_green, lam)
            ref = golden_section(lifted_objective(state, spike, samples, exp_green, lam),
                                 0.0, 1.0)
            assert g == pytest.approx(ref, abs=1e-8)

    def test_in_unit_interval_and_descent(self, exp_green):
        for seed in range(30):
            samples, lam, state, spike = random_state(exp_green, 500 + seed)
            g = fw_gamma(state, spike, samples, exp_green, lam)
            assert 0 <= g <= 1
            f = lifted_objective(state, spike, samples, exp_green, lam)
            assert f(g) <= f(0.0) + 1e-12

    def test_zero_denominator(self, exp_green):
        samples = SampleSet(sample_positions(5, 0), np.ones(5))
        state = FwState.initial(samples, 1.0)
        state.measure = SparseMeasure([1.0], [state.M_bound])
        state.s = state.M_bound
        assert fw_gamma(state, (1.0, 1.0), samples, exp_green, 1.0) == 0.0


class TestCertificate:
    def test_expansion(self, exp_green):
        m, s = synthetic_samples(exp_green, 3, 4)
        lam = 0.3
        state = FwState.initial(s, lam)
        state.measure = SparseMeasure(m.knots, 0.5 * m.weights)
        r = s.values - forward(state.measure, s.positions, exp_green)
        for t in np.linspace(0, TWO_PI, 13):
            ref = 2 / lam * sum(r_l * float(green_eval_closed_form(3.0, 2, TWO_PI, th - t))
                                for r_l, th in zip(r, s.positions))
            assert certificate_eval(state, s, exp_green, lam, t) == pytest.approx(ref, rel=1e-12)

    def test_vector_input(self, exp_green):
        _, s = synthetic_samples(exp_green, 2, 1)
        state = FwState.initial(s, 1.0)
        t = np.array([[0.1, 0.2], [0.3, 0.4]])
        out = certificate_eval(state, s, exp_green, 1.0, t)
        assert out.shape == (2, 2)
        assert out[1, 1] == pytest.approx(certificate_eval(state, s, exp_green, 1.0, 0.4))

    @pytest.mark.parametrize("seed", range(5))
    def test_argmax_beats_fine_grid(self, exp_green, seed):
        m, s = synthetic_samples(exp_green, 3, seed, noise=20)
        lam = 0.1 * lambda_base_fw(s, exp_green)
        state = FwState.initial(s, lam)
        t, v = certificate_argmax(state, s, exp_green, lam, grid_points=1024)
        fine = np.arange(10 * 1024) * TWO_PI / (10 * 1024)
        best = np.max(np.abs(certificate_eval(state, s, exp_green, lam, fine)))
        assert abs(v) >= best - 1e-9 * best
        assert v == pytest.approx(certificate_eval(state, s, exp_green, lam, t))

    def test_zero_residual(self, exp_green):
        s = SampleSet(sample_positions(5, 0), np.zeros(5))
        t, v = certificate_argmax(FwState.initial(s, 1.0), s, exp_green, 1.0)
        assert v == 0.0

    def test_grid_kernel(self, exp_green):
        _, s = synthetic_samples(exp_green, 2, 3)
        grid = CertificateGrid(s, exp_green, 64)
        assert grid.kernel.shape == (s.positions.size, 64)
        assert grid.spacing == pytest.approx(TWO_PI / 64)

    def test_lambda_base(self, exp_green):
        _, s = synthetic_samples(exp_green, 2, 3)
        base = lambda_base_fw(s, exp_green)
        state = FwState.initial(s, 2.0)
        _, v = certificate_argmax(state, s, exp_green, 2.0, refine=False)
        assert base == pytest.approx(abs(v))


class TestSolve:
    def test_zero_data_single_iteration(self, exp_green):
        s = SampleSet(sample_positions(9, 0), np.zeros(9))
        for variant in Variant:
            m, rep = fw_solve(s, exp_green, FwConfig(1.0, variant=variant))
            assert len(m) == 0 and rep.iterations == 1 and rep.converged

    def test_large_lambda_stays_empty(self, exp_green):
        _, s = synthetic_samples(exp_green, 3, 2)
        lam = 2.5 * lambda_base_fw(s, exp_green)
        m, rep = fw_solve(s, exp_green, FwConfig(lam))
        assert len(m) == 0 and rep.converged and rep.iterations == 1

    @pytest.mark.parametrize("variant", list(Variant))
    def test_single_spike(self, exp_green, variant):
        truth = SparseMeasure([2.0], [1.0])
        # a knot is only located up to the gap before the next sample
        pos = sample_positions(256, 4, mode="equispaced") + 0.005
        s = SampleSet(pos, forward(truth, pos, exp_green))
        lam = 1e-3 * lambda_base_fw(s, exp_green)
        m, rep = fw_solve(s, exp_green, FwConfig(lam, variant=variant, max_iter=2000))
        j = np.argmax(np.abs(m.weights))
        assert torus_distance(m.knots[j], 2.0, TWO_PI) < 1e-2
        assert m.weights[j] == pytest.approx(1.0, abs=1e-2)
        assert np.abs(m.weights).sum() - abs(m.weights[j]) < 1e-2

    def test_objective_field(self, exp_green):
        _, s = synthetic_samples(exp_green, 3, 5, noise=20)
        lam = 0.1 * lambda_base_fw(s, exp_green)
        m, rep = fw_solve(s, exp_green, FwConfig(lam))
        assert rep.objective == pytest.approx(objective_eval(m, s, exp_green, lam))
        assert rep.lam == lam and rep.sparsity == len(m)
        assert rep.objective < float(s.values @ s.values)

    @pytest.mark.parametrize("seed", range(4))
    def test_lift_invariant(self, exp_green, seed):
        _, s = synthetic_samples(exp_green, 4, seed, noise=20)
        lam = 0.1 * lambda_base_fw(s, exp_green)
        _, rep = fw_solve(s, exp_green, FwConfig(lam))
        for row in rep.trace:
            assert row["s"] == row["tv"]
            if not math.isnan(row["s_lift"]):
                assert row["s_lift"] == pytest.approx(row["tv"], rel=1e-12, abs=1e-15)

    @pytest.mark.parametrize("seed", range(4))
    def test_regular_objective_nonincreasing(self, exp_green, seed):
        _, s = synthetic_samples(exp_green, 4, seed, noise=20)
        lam = 0.1 * lambda_base_fw(s, exp_green)
        _, rep = fw_solve(s, exp_green, FwConfig(lam))
        obj = [row["objective"] for row in rep.trace]
        assert np.all(np.diff(obj) <= 1e-12 * obj[0])

    @pytest.mark.parametrize("seed", range(4))
    def test_reweighted_monotone_and_better(self, exp_green, seed):
        _, s = synthetic_samples(exp_green, 4, seed, noise=20)
        lam = 0.1 * lambda_base_fw(s, exp_green)
        _, reg = fw_solve(s, exp_green, FwConfig(lam))
        _, rw = fw_solve(s, exp_green, FwConfig(lam, variant="reweighted"))
        obj = [row["objective"] for row in rw.trace]
        assert np.all(np.diff(obj) <= 1e-12 * obj[0])
        assert rw.objective <= reg.objective + 1e-9

    @pytest.mark.parametrize("seed", range(4))
    def test_stopping_sound(self, exp_green, seed):
        _, s = synthetic_samples(exp_green, 3, seed, noise=20)
        lam = 0.1 * lambda_base_fw(s, exp_green)
        cfg = FwConfig(lam, grid_points=1024)
        m, rep = fw_solve(s, exp_green, cfg)
        assert rep.converged
        fine = np.arange(4 * 1024) * TWO_PI / (4 * 1024)
        state = FwState.initial(s, lam)
        state.measure = m
        eta = np.max(np.abs(certificate_eval(state, s, exp_green, lam, fine)))
        assert abs(eta - 1) <= cfg.nu

    def test_budget_exhaustion(self, exp_green):
        _, s = synthetic_samples(exp_green, 4, 1, noise=20)
        lam = 1e-3 * lambda_base_fw(s, exp_green)
        _, rep = fw_solve(s, exp_green, FwConfig(lam, max_iter=3))
        assert not rep.converged and rep.iterations == 3 and len(rep.trace) == 3

    def test_harmonic_rule_runs(self, exp_green):
        _, s = synthetic_samples(exp_green, 2, 0, noise=20)
        lam = 0.1 * lambda_base_fw(s, exp_green)
        _, rep = fw_solve(s, exp_green, FwConfig(lam, step_rule="harmonic", max_iter=50))
        assert len(rep.trace) == rep.iterations == 50
        assert rep.trace[-1]["objective"] < rep.trace[0]["objective"]

    def test_custom_fista_settings(self, exp_green):
        _, s = synthetic_samples(exp_green, 2, 0, noise=20)
        lam = 0.1 * lambda_base_fw(s, exp_green)
        m, rep = fw_solve(s, exp_green, FwConfig(lam, variant="reweighted"),
                          FistaConfig(123.0, epsilon=1e-8))
        assert rep.lam == lam
