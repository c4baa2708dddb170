import numpy as np
import pytest

import hammcert as hc
from hammcert import (ConfigError, ModelViolationError, Window, c_tilde,
                      gamma_c, recip_M, recip_m, sup_abs_1d)
from hammcert.constants import Opt1DConfig, extremum_1d
from hammcert.expr import (BOUNDARY_CONTEXT, ENVELOPE_CONTEXT, KERNEL_CONTEXT,
                           parse_expr)
from hammcert.kernels import EnvelopeSpec, KernelDef, kernel_from_catalog
from conftest import FAST_OPT, single_component_spec

K1 = kernel_from_catalog("example-k1")
K2 = kernel_from_catalog("example-k2")
G11 = parse_expr("3/4 - t", BOUNDARY_CONTEXT)
G21 = parse_expr("9/10 - t", BOUNDARY_CONTEXT)
PHI1 = EnvelopeSpec("declared", parse_expr("3/4", ENVELOPE_CONTEXT))
PHI2 = EnvelopeSpec("declared", parse_expr("1 - s", ENVELOPE_CONTEXT))


# --------------------------------------------------------------------------
# independent brute-force oracles (dense grid + trapezoid), hand-coded k2

def k2_formula(t, s):
    return 0.8 * (1 - s) + 0.2 * np.maximum(0.5 - s, 0) - np.maximum(t - s, 0)


def brute_recip_m20(nt=10_000, ns=10_000):
    ts = np.linspace(0, 1, nt)
    ss = np.linspace(0, 1, ns + 1)
    best = -np.inf
    for lo in range(0, nt, 250):
        T, S = np.meshgrid(ts[lo:lo + 250], ss, indexing="ij")
        vals = np.trapezoid(np.abs(k2_formula(T, S)), ss, axis=1)
        best = max(best, float(vals.max()))
    return best


def brute_recip_M2(nt=10_000, ns=10_000):
    ts = np.linspace(0, 0.5, nt)
    ss = np.linspace(0, 0.5, ns + 1)
    worst = np.inf
    for lo in range(0, nt, 250):
        T, S = np.meshgrid(ts[lo:lo + 250], ss, indexing="ij")
        vals = np.trapezoid(k2_formula(T, S), ss, axis=1)
        worst = min(worst, float(vals.min()))
    return worst


class TestSupAbs:
    def test_gamma11_sup(self):
        val, arg = sup_abs_1d(lambda t: hc.eval_scalar(G11, {"t": t}),
                              Window(0, 1), vectorized=True)
        assert val == pytest.approx(0.75, abs=1e-12)
        assert arg == pytest.approx(0.0, abs=1e-9)

    def test_gamma21_sup(self):
        val, arg = sup_abs_1d(lambda t: hc.eval_scalar(G21, {"t": t}),
                              Window(0, 1), vectorized=True)
        assert val == pytest.approx(0.9, abs=1e-12)
        assert arg == pytest.approx(0.0, abs=1e-9)

    def test_constant_function(self):
        val, _ = sup_abs_1d(lambda t: 1.0, Window(0, 1), FAST_OPT)
        assert val == 1.0

    def test_interior_maximum_refined(self):
        # grid alone cannot hit the argmax of t(1-t); golden refinement must
        val, arg, _ = extremum_1d(lambda t: t * (1 - t), 0.0, 1.0,
                                  Opt1DConfig(coarse_grid=100), mode="max",
                                  vectorized=True)
        assert val == pytest.approx(0.25, abs=1e-12)
        assert arg == pytest.approx(0.5, abs=1e-6)


class TestRecipM:
    def test_k1_order0(self):
        assert recip_m(K1, 0) == pytest.approx(0.375, abs=1e-6)

    def test_k1_order1(self):
        assert recip_m(K1, 1) == pytest.approx(1.0, abs=1e-9)

    def test_k2_order1(self):
        assert recip_m(K2, 1) == pytest.approx(1.0, abs=1e-9)

    def test_k2_order0_matches_brute_force(self):
        # the tool must agree with an independent oracle regardless of any
        # declared value; hand derivation gives 17/40 (max of 17/40 - t^2/2)
        got = recip_m(K2, 0)
        oracle = brute_recip_m20()
        assert got == pytest.approx(oracle, abs=1e-4)
        assert got == pytest.approx(17 / 40, abs=1e-6)

    def test_recip_M_k1(self):
        assert recip_M(K1, Window(0, 0.375)) == pytest.approx(9 / 64, abs=1e-6)

    def test_recip_M_k2_matches_brute_force(self):
        got = recip_M(K2, Window(0, 0.5))
        oracle = brute_recip_M2()
        assert got == pytest.approx(oracle, abs=1e-4)
        assert got == pytest.approx(0.2, abs=1e-6)

    def test_recip_M_constant_kernel(self):
        one = parse_expr("1", KERNEL_CONTEXT)
        kd = KernelDef(one, parse_expr("0*t", KERNEL_CONTEXT), (), False)
        assert recip_M(kd, Window(0, 1), opt_cfg=FAST_OPT) == pytest.approx(1.0, abs=1e-12)

    def test_order_validated(self):
        with pytest.raises(ValueError):
            recip_m(K1, 2)

    def test_interior_supremum_refined(self):
        # sup of the s-integral sits at t = 1/pi, off every grid point, so
        # only the golden-section refinement reaches the exact value 1
        k = parse_expr(f"1 - (t - {1/np.pi})^2", KERNEL_CONTEXT)
        dk = parse_expr(f"-2*(t - {1/np.pi})", KERNEL_CONTEXT)
        kd = KernelDef(k, dk, (), False)
        assert recip_m(kd, 0) == pytest.approx(1.0, abs=1e-10)

    def test_interior_infimum_refined(self):
        k = parse_expr(f"1/2 + (t - {1/np.pi})^2", KERNEL_CONTEXT)
        dk = parse_expr(f"2*(t - {1/np.pi})", KERNEL_CONTEXT)
        kd = KernelDef(k, dk, (), False)
        # integral over the window [1/4, 3/4] is (1/2 + (t-1/pi)^2)/2,
        # minimal at the interior point t = 1/pi with value 1/4
        assert recip_M(kd, Window(0.25, 0.75)) == pytest.approx(0.25, abs=1e-10)

    def test_sign_roots_ignore_flat_stretches(self):
        # dk = -step(t-s) vanishes identically for s > t; no spurious splits
        from hammcert.constants import _sign_roots
        from hammcert.kernels import eval_dk
        fn = lambda s: np.asarray(eval_dk(K1, 0.3, s), dtype=float)
        assert _sign_roots(fn, 0.0, 1.0) == []


class TestCTilde:
    def test_k1_declared(self):
        assert c_tilde(K1, Window(0, 0.375), PHI1) == pytest.approx(1 / 3, abs=1e-6)

    def test_k2_declared(self):
        assert c_tilde(K2, Window(0, 0.5), PHI2) == pytest.approx(0.4, abs=1e-3)

    def test_k1_tight(self):
        assert c_tilde(K1, Window(0, 0.375), EnvelopeSpec("tight")) == \
            pytest.approx(0.5, abs=1e-6)

    def test_constant_kernel_tight(self):
        one = parse_expr("1", KERNEL_CONTEXT)
        kd = KernelDef(one, parse_expr("0*t", KERNEL_CONTEXT), (), False)
        assert c_tilde(kd, Window(0.2, 0.7), EnvelopeSpec("tight"),
                       opt_cfg=FAST_OPT) == pytest.approx(1.0, abs=1e-12)

    def test_window_positivity_failure(self):
        # k1 goes negative for t beyond 3/4, so a window reaching 1 fails C2
        with pytest.raises(ModelViolationError, match="C2"):
            c_tilde(K1, Window(0, 1.0), PHI1, opt_cfg=FAST_OPT)

    def test_declared_envelope_must_majorize(self):
        small = EnvelopeSpec("declared", parse_expr("1/10", ENVELOPE_CONTEXT))
        with pytest.raises(ModelViolationError, match="envelope violated"):
            c_tilde(K1, Window(0, 0.375), small, opt_cfg=FAST_OPT)


class TestGammaC:
    def test_gamma21(self):
        assert gamma_c(G21, Window(0, 0.5)) == pytest.approx(4 / 9, abs=1e-9)

    def test_gamma11_tight_exceeds_declared(self):
        # tight value is 1/2; the bundled config conservatively declares 1/3
        assert gamma_c(G11, Window(0, 0.375)) == pytest.approx(0.5, abs=1e-9)

    def test_constant_gamma(self):
        one = parse_expr("1", BOUNDARY_CONTEXT)
        assert gamma_c(one, Window(0.1, 0.9), FAST_OPT) == 1.0

    def test_sign_failure(self):
        neg = parse_expr("t - 1/2", BOUNDARY_CONTEXT)
        with pytest.raises(ModelViolationError, match="C5"):
            gamma_c(neg, Window(0, 0.375), FAST_OPT)


class TestAssembly:
    def test_example_constants(self, example_spec, example_cc):
        c1, c2 = example_cc
        assert c1.c == pytest.approx(1 / 3, abs=1e-9)
        assert c1.c_tilde == pytest.approx(1 / 3, abs=1e-6)
        assert c1.c_gamma[0] == pytest.approx(1 / 3, abs=1e-12)  # declared override
        assert c2.c == pytest.approx(0.4, abs=1e-9)
        assert c2.c_gamma[0] == pytest.approx(4 / 9, abs=1e-9)
        assert c1.recip_m0 == pytest.approx(0.375, abs=1e-6)
        assert c1.recip_M == pytest.approx(9 / 64, abs=1e-6)
        assert c2.recip_m0 == pytest.approx(17 / 40, abs=1e-6)
        assert c2.recip_M == pytest.approx(0.2, abs=1e-6)

    def test_discrepancy_flags_for_printed_values(self, example_cc):
        # the bundled config declares 21/40 and 2/5; both must be flagged and
        # never substituted
        rec_m = example_cc[1].record("recip_m0")
        assert rec_m.declared == pytest.approx(21 / 40)
        assert rec_m.used == rec_m.computed
        assert "declared-differs-from-computed" in rec_m.flags
        rec_M = example_cc[1].record("recip_M")
        assert rec_M.declared == pytest.approx(0.4)
        assert "declared-differs-from-computed" in rec_M.flags
        assert rec_M.used == rec_M.computed

    def test_consistent_declarations_not_flagged(self, example_cc):
        assert example_cc[0].record("recip_m0").flags == ()
        assert example_cc[0].record("recip_M").flags == ()
        assert example_cc[0].record("gamma_sup[0]").flags == ()

    def test_tight_mode_component1(self):
        spec = single_component_spec(
            "example-k1", window=(0, 0.375), envelope="tight",
            gammas=[{"gamma": "example-gamma11", "eta": 0.1,
                     "h": "der(1,0.5)^2"}])
        cc = hc.assemble_cone_constants(spec)
        assert cc[0].c_tilde == pytest.approx(0.5, abs=1e-6)
        assert cc[0].c_gamma[0] == pytest.approx(0.5, abs=1e-9)
        assert cc[0].c == pytest.approx(0.5, abs=1e-6)

    def test_all_ones_problem(self):
        spec = single_component_spec(
            kernel={"k": "1", "dk_dt": "0*t", "breakpoints": [],
                    "moving_breakpoint": False},
            window=(0, 1),
            gammas=[{"gamma": "1", "dgamma": "0*t", "eta": 1.0, "h": "val(1,0)"}])
        cc = hc.assemble_cone_constants(spec, opt_cfg=FAST_OPT)
        assert cc[0].c_tilde == pytest.approx(1.0, abs=1e-12)
        assert cc[0].c_gamma[0] == pytest.approx(1.0, abs=1e-12)
        assert cc[0].c == pytest.approx(1.0, abs=1e-12)

    def test_override_must_add_slack(self):
        spec = single_component_spec(
            "example-k1", window=(0, 0.375), envelope={"phi0": "3/4"},
            gammas=[{"gamma": "example-gamma11", "eta": 0.1,
                     "h": "der(1,0.5)^2"}])
        doc_comp = {
            "kernel": "example-k1", "window": [0, 0.375], "lambda": 1.0,
            "f": "1", "w": "1", "envelope": {"phi0": "3/4"},
            "gammas": [{"gamma": "example-gamma11", "eta": 0.1, "h": "der(1,0.5)^2"}],
            "declared": {"c_tilde": 0.9},
        }
        bad = hc.spec_from_dict({"n": 1, "components": [doc_comp]})
        with pytest.raises(ConfigError, match="exceeds the computed"):
            hc.assemble_cone_constants(bad, opt_cfg=FAST_OPT)

    def test_declared_phi1_validated(self):
        doc_comp = {
            "kernel": "example-k1", "window": [0, 0.375], "lambda": 1.0,
            "f": "1", "w": "1",
            "envelope": {"phi0": "3/4", "phi1": "1/2"},  # |dk| reaches 1
            "gammas": [],
        }
        bad = hc.spec_from_dict({"n": 1, "components": [doc_comp]})
        with pytest.raises(ModelViolationError, match="Phi1"):
            hc.assemble_cone_constants(bad, opt_cfg=FAST_OPT)
        doc_comp["envelope"]["phi1"] = "1"
        good = hc.spec_from_dict({"n": 1, "components": [doc_comp]})
        hc.assemble_cone_constants(good, opt_cfg=FAST_OPT)

    def test_report_shape(self, example_spec, example_cc):
        rep = hc.constants_report(example_spec, example_cc)
        assert len(rep["components"]) == 2
        flagged = {(f["component"], f["constant"]) for f in rep["discrepancies"]}
        assert (2, "recip_m0") in flagged and (2, "recip_M") in flagged
        assert rep["notes"]


class TestProperties:
    def scaled(self, kd, lam):
        k = hc.expr.Bin("*", hc.expr.Num(lam), kd.k)
        dk = hc.expr.Bin("*", hc.expr.Num(lam), kd.dk_dt)
        return KernelDef(k, dk, kd.fixed_breakpoints, kd.moving_breakpoint)

    def test_scaling(self):
        lam = 2.5
        k1s = self.scaled(K1, lam)
        assert recip_m(k1s, 0, opt_cfg=FAST_OPT) == pytest.approx(
            lam * recip_m(K1, 0, opt_cfg=FAST_OPT), abs=1e-9)
        assert recip_M(k1s, Window(0, 0.375), opt_cfg=FAST_OPT) == pytest.approx(
            lam * recip_M(K1, Window(0, 0.375), opt_cfg=FAST_OPT), abs=1e-9)
        a = c_tilde(k1s, Window(0, 0.375), EnvelopeSpec("tight"), opt_cfg=FAST_OPT)
        b = c_tilde(K1, Window(0, 0.375), EnvelopeSpec("tight"), opt_cfg=FAST_OPT)
        assert a == pytest.approx(b, abs=1e-9)

    @pytest.mark.parametrize("kd,windows", [
        (K1, [(0, 0.25), (0, 0.375), (0, 0.5)]),
        (K2, [(0, 0.25), (0, 0.4), (0, 0.5)]),
    ])
    def test_window_monotonicity(self, kd, windows):
        vals = [c_tilde(kd, Window(*w), EnvelopeSpec("tight"), opt_cfg=FAST_OPT)
                for w in windows]
        for small, large in zip(vals[:-1], vals[1:]):
            assert large <= small + 1e-9

    def test_recip_m_dominates_signed_integral(self):
        # triangle inequality on 50 random piecewise-linear kernels
        rng = np.random.default_rng(17)
        opt = Opt1DConfig(coarse_grid=128)
        for trial in range(50):
            a, b, c, d, e = rng.uniform(-1, 1, 5)
            alpha = rng.uniform(0.1, 0.9)
            k = parse_expr(
                f"{a} + {b}*s + {c}*t + {d}*pos({alpha} - s) + {e}*pos(t - s)",
                KERNEL_CONTEXT)
            dk = parse_expr(f"{c} + {e}*step(t - s)", KERNEL_CONTEXT)
            kd = KernelDef(k, dk, (alpha,), True)
            val = recip_m(kd, 0, opt_cfg=opt)
            signed = max(
                abs(hc.integrate(lambda s, t=t: hc.eval_k(kd, t, s), 0.0, 1.0,
                                 [alpha, t]))
                for t in np.linspace(0, 1, 41))
            assert val >= signed - 1e-9, (trial, val, signed)
