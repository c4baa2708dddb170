import math

import pytest

import hammcert as hc
from hammcert import (ComponentBounds, DeclaredBounds, HBounds,
                      estimate_ranges, falsify_bounds)


def with_bounds(db, comp_index, **changes):
    comps = list(db.components)
    base = comps[comp_index]
    fields = {k: getattr(base, k) for k in
              ("w_lo", "w_hi", "f_hi", "f_lo", "delta_tilde", "xi_tilde", "h")}
    fields.update(changes)
    comps[comp_index] = ComponentBounds(**fields)
    return DeclaredBounds(db.rho, tuple(comps))


class TestFalsifier:
    def test_example_declarations_survive(self, example_spec, example_cc):
        rep = falsify_bounds(example_spec, example_cc, example_spec.bounds_at(1.0),
                             samples=300, seed=10)
        assert not rep.falsified, [v.detail for v in rep.violations]
        assert "w_hi[1]" in rep.checked and "f_hi[1]" in rep.checked

    def test_wrong_w_bound_found_with_witness(self, example_spec, example_cc):
        # sampled w1 values reach ~0.9, so an upper bound of 0.5 is wrong
        db = with_bounds(example_spec.bounds_at(1.0), 0, w_hi=0.5)
        rep = falsify_bounds(example_spec, example_cc, db, samples=300, seed=10)
        hits = [v for v in rep.violations if v.kind == "w_hi" and v.component == 1]
        assert hits and hits[0].witness is not None
        # soundness: re-evaluating the witness reproduces the violation
        v = hits[0]
        again = hc.eval_functional(example_spec.components[0].w, v.witness,
                                   example_spec.quad)
        assert again == pytest.approx(v.observed, abs=1e-12)
        assert again > 0.5

    def test_wrong_h_bound_found(self, example_spec, example_cc):
        db = with_bounds(example_spec.bounds_at(1.0), 0,
                         h=(HBounds(lo=0.0, hi=0.05, delta=0.0),))
        rep = falsify_bounds(example_spec, example_cc, db, samples=300, seed=11)
        hits = [v for v in rep.violations if v.kind == "h_hi"]
        assert hits and hits[0].count >= 1
        v = hits[0]
        again = hc.eval_functional(example_spec.components[0].gammas[0].h,
                                   v.witness, example_spec.quad)
        assert again == pytest.approx(v.observed, abs=1e-12)

    def test_wrong_f_bound_found(self, example_spec, example_cc):
        # f1 reaches 2e^2 at the box corner, so 1.0 is falsified by the grid
        db = with_bounds(example_spec.bounds_at(1.0), 0, f_hi=1.0)
        rep = falsify_bounds(example_spec, example_cc, db, samples=1, seed=1)
        hits = [v for v in rep.violations if v.kind == "f_hi"]
        assert hits and hits[0].point is not None
        # witness point evaluates above the bound
        p = hits[0].point
        env = {k: p[k] for k in ("t", "w", "u1", "u2", "du1", "du2")}
        val = hc.eval_scalar(example_spec.components[0].f, env)
        assert val == pytest.approx(hits[0].observed, abs=1e-12)
        assert val > 1.0

    def test_wrong_delta_tilde_found(self, example_spec, example_cc):
        # f1 >= 2 x1 fails near x1 = 1 (e * w_lo < 2)
        db = with_bounds(example_spec.bounds_at(1.0), 0, delta_tilde=2.0)
        rep = falsify_bounds(example_spec, example_cc, db, samples=1, seed=1)
        assert any(v.kind == "f_delta_tilde" for v in rep.violations)

    def test_xi_tilde_example_survives(self, example_spec, example_cc):
        # f2 <= |x2| holds on the box; the bundled declaration must survive
        rep = falsify_bounds(example_spec, example_cc, example_spec.bounds_at(1.0),
                             samples=1, seed=3)
        assert not any(v.kind == "f_xi_tilde" for v in rep.violations)

    def test_skips_without_w_range(self, example_spec, example_cc):
        db = with_bounds(example_spec.bounds_at(1.0), 0, w_lo=None, w_hi=None)
        rep = falsify_bounds(example_spec, example_cc, db, samples=1, seed=1)
        assert any(s.startswith("f-box[1]") for s in rep.skipped)

    def test_samples_validated(self, example_spec, example_cc):
        with pytest.raises(ValueError):
            falsify_bounds(example_spec, example_cc, example_spec.bounds_at(1.0),
                           samples=0, seed=1)


class TestEstimate:
    def test_ranges_inside_declared(self, example_spec, example_cc):
        est = estimate_ranges(example_spec, example_cc, 1.0, samples=200, seed=6)
        assert est["rigorous"] is False
        w2 = est["w"][1]
        assert math.exp(-4) <= w2["min"] <= w2["max"] <= 1.0
        w1 = est["w"][0]
        assert 1 / (1 + math.e) <= w1["min"] <= w1["max"] <= math.e

    def test_prefix_monotonicity(self, example_spec, example_cc):
        # same seed: the 100-sample range is contained in the 1000-sample one
        small = estimate_ranges(example_spec, example_cc, 1.0, samples=100, seed=8)
        large = estimate_ranges(example_spec, example_cc, 1.0, samples=1000, seed=8)
        for ws, wl in zip(small["w"], large["w"]):
            assert wl["min"] <= ws["min"] and ws["max"] <= wl["max"]
        for hs_comp, hl_comp in zip(small["h"], large["h"]):
            for hs, hl in zip(hs_comp, hl_comp):
                assert hl["min"] <= hs["min"] and hs["max"] <= hl["max"]

    def test_constant_functional_zero_variance(self):
        from conftest import single_component_spec
        spec = single_component_spec(
            "example-k1", w="2", envelope={"phi0": "3/4"},
            gammas=[{"gamma": "example-gamma11", "eta": 0.0, "h": "1"}])
        cc = hc.assemble_cone_constants(spec, opt_cfg=hc.Opt1DConfig(coarse_grid=256))
        est = estimate_ranges(spec, cc, 1.0, samples=50, seed=2)
        assert est["w"][0]["min"] == est["w"][0]["max"] == 2.0
        assert est["h"][0][0]["min"] == est["h"][0][0]["max"] == 1.0

    def test_rho_validated(self, example_spec, example_cc):
        with pytest.raises(ValueError):
            estimate_ranges(example_spec, example_cc, 0.0, samples=10, seed=1)


def test_latin_hypercube_box_points():
    # beyond 8 dimensions the factorial grid gives way to a seeded LHS
    import numpy as np
    from hammcert.bounds import _box_points, LHS_POINTS
    lows = np.array([-1.0] * 9)
    highs = np.array([2.0] * 9)
    rng = np.random.default_rng(4)
    pts = _box_points(lows, highs, rng)
    assert pts.shape == (LHS_POINTS, 9)
    assert np.all(pts >= lows) and np.all(pts <= highs)
    # stratification: every 1/LHS_POINTS stratum of each dim holds one point
    strata = np.floor((pts - lows) / (highs - lows) * LHS_POINTS).astype(int)
    for d in range(9):
        assert len(set(strata[:, d].tolist())) == LHS_POINTS


def test_ball_sampling_includes_interior(example_spec, example_cc):
    rep = falsify_bounds(example_spec, example_cc, example_spec.bounds_at(1.0),
                         samples=100, seed=12, include_interior=True)
    assert not rep.falsified


def test_declared_bounds_invariants():
    with pytest.raises(ValueError, match="w_lo"):
        ComponentBounds(w_lo=2.0, w_hi=1.0)
    with pytest.raises(ValueError, match="nonnegative"):
        ComponentBounds(w_lo=-1.0)
    with pytest.raises(ValueError, match="h_lo"):
        HBounds(lo=3.0, hi=1.0)
    with pytest.raises(ValueError, match="rho"):
        DeclaredBounds(0.0, ())
