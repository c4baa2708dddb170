import numpy as np
import pytest

from hammcert import (DiscreteState, ModelViolationError, Params, SolverConfig,
                      apply_T, cone_membership, localization_check, residual,
                      solve_fixed_point, zero_state)
from hammcert.cone import sample_cone_boundary_rng
from conftest import single_component_spec, trig_state


def parabola(nodes, peak):
    return peak - nodes ** 2 / 2


class TestApplyT:
    def test_linear_k1_oracle(self, linear_k1_spec):
        # closed form: (Tu)(t) = 3/8 - t^2/2, (Tu)'(t) = -t, any u
        for u in (zero_state(1, 128), trig_state(2)):
            Tu = apply_T(linear_k1_spec, u)
            assert np.max(np.abs(Tu.values[0] - parabola(Tu.nodes, 3 / 8))) <= 1e-12
            assert np.max(np.abs(Tu.derivatives[0] + Tu.nodes)) <= 1e-12

    def test_linear_k1_satisfies_bvp_side_conditions(self, linear_k1_spec):
        # the image satisfies (1/4) u'(1) + u(1/2) = 0 identically
        Tu = apply_T(linear_k1_spec, zero_state(1, 128))
        lhs = 0.25 * Tu.derivative(0, 1.0) + Tu.value(0, 0.5)
        assert abs(lhs) <= 1e-12

    def test_linear_k2_oracle(self, linear_k2_spec):
        # doubles as the independent oracle for 1/m_{2,0} = 17/40
        Tu = apply_T(linear_k2_spec, zero_state(1, 128))
        assert np.max(np.abs(Tu.values[0] - parabola(Tu.nodes, 17 / 40))) <= 1e-12
        assert np.max(np.abs(Tu.derivatives[0] + Tu.nodes)) <= 1e-12

    def test_zero_parameters_give_zero(self, example_spec):
        p = Params.from_spec(example_spec).with_overrides(
            {"lambda1": 0, "lambda2": 0, "eta11": 0, "eta21": 0})
        Tu = apply_T(example_spec, trig_state(1, n=2), params=p)
        assert np.all(Tu.values == 0.0) and np.all(Tu.derivatives == 0.0)

    def test_negative_f_rejected(self):
        spec = single_component_spec("example-k1", f="u1", w="1",
                                     envelope={"phi0": "3/4"})
        u = trig_state(3)  # sign-changing, so f = u1 goes negative
        with pytest.raises(ModelViolationError, match="C4"):
            apply_T(spec, u)

    def test_breakpoint_must_sit_on_node(self, linear_k1_spec):
        # 99 panels put no node at s = 0.5
        from hammcert import ConfigError
        with pytest.raises(ConfigError, match="breakpoint"):
            apply_T(linear_k1_spec, zero_state(1, 99))


class TestResidual:
    def test_exact_fixed_point(self, linear_k1_spec):
        nodes = np.linspace(0, 1, 129)
        u = DiscreteState(nodes, parabola(nodes, 3 / 8)[None, :], (-nodes)[None, :])
        assert residual(linear_k1_spec, u) <= 1e-10

    def test_zero_state_residual_is_norm_of_image(self, linear_k1_spec):
        # T(0) = 3/8 - t^2/2 whose C1 norm is 1 (sup of |derivative|)
        assert residual(linear_k1_spec, zero_state(1, 128)) == \
            pytest.approx(1.0, abs=1e-12)

    def test_zero_problem(self, example_spec):
        p = Params.from_spec(example_spec).with_overrides(
            {"lambda1": 0, "lambda2": 0, "eta11": 0, "eta21": 0})
        assert residual(example_spec, zero_state(2, 128), params=p) == 0.0


class TestSolve:
    def test_linear_k1_converges_to_oracle(self, linear_k1_spec):
        rep = solve_fixed_point(linear_k1_spec)
        assert rep.converged and rep.iterations <= 100
        err = np.max(np.abs(rep.state.values[0] - parabola(rep.state.nodes, 3 / 8)))
        assert err <= 1e-10

    def test_linear_k2_converges_to_oracle(self, linear_k2_spec):
        rep = solve_fixed_point(linear_k2_spec)
        assert rep.converged and rep.iterations <= 100
        err = np.max(np.abs(rep.state.values[0] - parabola(rep.state.nodes, 17 / 40)))
        assert err <= 1e-10

    def test_zero_problem_one_iteration(self, example_spec):
        p = Params.from_spec(example_spec).with_overrides(
            {"lambda1": 0, "lambda2": 0, "eta11": 0, "eta21": 0})
        rep = solve_fixed_point(example_spec, params=p)
        assert rep.converged and rep.iterations == 1
        assert rep.norms.overall == 0.0

    def test_example_solve(self, example_solution):
        rep = example_solution
        assert rep.converged
        assert rep.residual <= 1e-8
        assert rep.membership.member
        assert rep.norms.overall <= 1.0
        assert rep.norms.overall >= 1e-3  # nonzero, inside the certified annulus
        assert rep.localization

    def test_residual_recheck_matches(self, example_spec, example_solution):
        again = residual(example_spec, example_solution.state)
        assert again == pytest.approx(example_solution.residual, abs=1e-12)

    def test_nystrom_consistency(self, example_spec, example_cc, example_solution):
        rep2 = solve_fixed_point(example_spec, cfg=SolverConfig(nodes=256),
                                 cc=example_cc)
        assert rep2.converged
        diff = np.max(np.abs(rep2.state.values[:, ::2] - example_solution.state.values))
        assert diff <= 1e-8

    def test_derivative_consistency(self, example_solution):
        # stored u' matches finite differences of u to O(h^2)
        u = example_solution.state
        h = u.nodes[1] - u.nodes[0]
        fd = (u.values[:, 2:] - u.values[:, :-2]) / (2 * h)
        assert np.max(np.abs(fd - u.derivatives[:, 1:-1])) <= 1e-3

    def test_supplied_initial_state(self, linear_k1_spec):
        start = trig_state(8)
        rep = solve_fixed_point(linear_k1_spec, initial_state=start)
        assert rep.converged

    def test_non_convergence_reported(self):
        # an expansive problem: lambda large makes damped Picard diverge
        spec = single_component_spec(
            "example-k1", lam=200.0, f="exp(u1)*w", w="1",
            envelope={"phi0": "3/4"})
        cfg = SolverConfig(max_iterations=120)
        rep = solve_fixed_point(spec, cfg=cfg)
        assert not rep.converged
        assert any("not converged" in n for n in rep.notes)
        assert np.isfinite(rep.residual) or rep.residual == np.inf

    def test_stagnation_halves_damping_once(self):
        # bounded growth keeps the divergence finite long enough for the
        # stagnation detector to halve the damping before giving up
        spec = single_component_spec(
            "example-k1", lam=200.0, f="1 + pos(u1)", w="1",
            envelope={"phi0": "3/4"})
        rep = solve_fixed_point(spec, cfg=SolverConfig(max_iterations=115))
        assert not rep.converged
        assert any("damping halved" in n for n in rep.notes)
        assert rep.damping_final == pytest.approx(0.25)


class TestConfig:
    def test_damping_range(self):
        with pytest.raises(ValueError):
            SolverConfig(damping=0.0)
        with pytest.raises(ValueError):
            SolverConfig(damping=1.5)

    def test_initial_mode(self):
        with pytest.raises(ValueError):
            SolverConfig(initial="random")


class TestLocalization:
    def test_inside(self, example_solution):
        assert localization_check(example_solution, 1e-3, 1.0)

    def test_zero_outside(self, example_spec, example_cc):
        p = Params.from_spec(example_spec).with_overrides(
            {"lambda1": 0, "lambda2": 0, "eta11": 0, "eta21": 0})
        rep = solve_fixed_point(example_spec, params=p)
        assert not localization_check(rep, 1e-3, 1.0)

    def test_sentinel_interval(self, example_solution):
        assert localization_check(example_solution, 0.0, np.inf)


class TestConeInvariance:
    def test_apply_T_maps_cone_to_cone(self, example_spec, example_cc):
        rng = np.random.default_rng(example_spec.seed)
        for _ in range(50):
            u = sample_cone_boundary_rng(example_spec, example_cc, 1.0, rng)
            Tu = apply_T(example_spec, u)
            assert cone_membership(Tu, example_cc, slack=1e-9).member
