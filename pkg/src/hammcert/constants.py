"""Cone and kernel constants: envelopes, window constants, integral norms.

Everything here realizes a sup/inf over t or s of kernel data:

* ``recip_m(kd, l)``   -- sup over t in [0,1] of the integral over s of
  |k(t,s)| (l = 0) or |dk/dt(t,s)| (l = 1); returned as the reciprocal
  quantity 1/m_l directly, nothing ever divides by an m.
* ``recip_M(kd, w)``   -- inf over t in the window [a,b] of the *signed*
  integral of k(t,s) over s in [a,b].
* ``c_tilde(kd, w, env)`` -- largest constant with k(t,s) >= c * Phi0(s)
  on the window, i.e. inf over s of (min over window t of k) / Phi0.
* ``gamma_c(gamma, w)`` -- (min over window of gamma) / sup|gamma|.

Sups and infs are grid scans refined by golden-section search on the
bracketing triple; results carry the grid resolution and are approximations
at that resolution, not rigorous enclosures.  Declared constants from the
configuration take precedence when consistent with the computed tight value
(c-type constants must not exceed it); integral norms are always computed,
and a declared value that disagrees is flagged, never substituted.

Inner integrals of |k| split panels additionally at sign changes of k,
located by bisection on a coarse sign pattern, because the absolute value
introduces kinks at unknown points.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

from .errors import ModelViolationError, ConfigError
from .expr import eval_scalar
from .kernels import (EnvelopeSpec, KernelDef, eval_dk, eval_k,
                      s_breakpoints)
from .quad import QuadConfig, integrate

if TYPE_CHECKING:
    from .problem import ProblemSpec

__all__ = ["Window", "Opt1DConfig", "ConeConstants", "ConstantRecord",
           "sup_abs_1d", "extremum_1d", "recip_m", "recip_M", "c_tilde",
           "gamma_c", "assemble_cone_constants", "constants_report",
           "RECIP_M_READING_NOTE"]

RECIP_M_READING_NOTE = (
    "1/M_i is computed as the infimum over t in [a_i,b_i] of the integral of "
    "k_i(t,s) over s in [a_i,b_i]; all sup/inf values are grid scans refined "
    "by golden-section search and are reported together with the grid "
    "resolution, not as rigorous enclosures.")

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Window:
    a: float
    b: float

    def __post_init__(self):
        if not (0.0 <= self.a < self.b <= 1.0):
            raise ValueError(f"window must satisfy 0 <= a < b <= 1: [{self.a}, {self.b}]")


@dataclass(frozen=True)
class Opt1DConfig:
    coarse_grid: int = 2048
    refine_tol: float = 1e-12


# ---------------------------------------------------------------------------
# 1-D extrema: coarse grid scan + golden-section refinement

def _golden_min(f: Callable[[float], float], a: float, b: float, tol: float):
    """Golden-section minimization on [a, b]; returns the best probed point."""
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    best_x, best_f = (c, fc) if fc <= fd else (d, fd)
    while abs(b - a) > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
        if fc < best_f:
            best_x, best_f = c, fc
        if fd < best_f:
            best_x, best_f = d, fd
    return best_x, best_f


def extremum_1d(f: Callable, a: float, b: float,
                cfg: Opt1DConfig | None = None, *, mode: str = "max",
                breakpoints: Sequence[float] = (), vectorized: bool = False):
    """Grid-certified extremum of f over [a, b].

    Returns (value, argpoint, grid_resolution).  The coarse grid includes
    the supplied breakpoints as nodes; the bracketing triple around the grid
    optimum is refined by golden-section search and the better of the two
    results is reported.  For mode "max" the value is a lower bound of the
    true sup at grid resolution (and symmetrically for "min").
    """
    cfg = cfg or Opt1DConfig()
    if mode not in ("min", "max"):
        raise ValueError(mode)
    grid = np.linspace(a, b, cfg.coarse_grid + 1)
    inner = [p for p in breakpoints if a < p < b]
    if inner:
        grid = np.unique(np.concatenate((grid, inner)))
    if vectorized:
        vals = np.broadcast_to(np.asarray(f(grid), dtype=float), grid.shape)
    else:
        vals = np.asarray([float(f(x)) for x in grid])
    if np.any(np.isnan(vals)):
        raise ModelViolationError("C1", f"NaN while scanning [{a}, {b}]")
    sign = 1.0 if mode == "min" else -1.0
    j = int(np.argmin(sign * vals))
    best_x, best_v = float(grid[j]), float(vals[j])
    lo = float(grid[max(j - 1, 0)])
    hi = float(grid[min(j + 1, grid.size - 1)])
    if hi > lo:
        gx, gv = _golden_min(lambda x: sign * float(f(x)), lo, hi, cfg.refine_tol)
        if gv < sign * best_v:
            best_x, best_v = gx, sign * gv
    resolution = (b - a) / cfg.coarse_grid if b > a else 0.0
    return best_v, best_x, resolution


def sup_abs_1d(f: Callable, w: Window, cfg: Opt1DConfig | None = None, *,
               breakpoints: Sequence[float] = (), vectorized: bool = False):
    """Grid-certified sup of |f| over the window; returns (value, argmax)."""
    if vectorized:
        g = lambda x: np.abs(f(x))
    else:
        g = lambda x: abs(f(x))
    value, arg, _ = extremum_1d(g, w.a, w.b, cfg, mode="max",
                                breakpoints=breakpoints, vectorized=vectorized)
    return value, arg


# ---------------------------------------------------------------------------
# Sign-change location (for integrating |k| accurately)

def _sign_roots(fn: Callable, a: float, b: float, coarse: int = 256) -> list[float]:
    """Roots of fn in (a,b) located from the coarse-grid sign pattern by
    bisection.  Strict sign changes are bisected; a grid point where fn
    vanishes exactly counts only when its neighbors straddle zero (a
    function that is zero on a whole stretch has no kink in |fn| there)."""
    xs = np.linspace(a, b, coarse + 1)
    v = np.broadcast_to(np.asarray(fn(xs), dtype=float), xs.shape)
    roots = [float(x) for x, val, left, right
             in zip(xs[1:-1], v[1:-1], v[:-2], v[2:])
             if val == 0.0 and left * right < 0.0]
    idx = np.nonzero(v[:-1] * v[1:] < 0.0)[0]
    if idx.size:
        lo, hi = xs[idx].copy(), xs[idx + 1].copy()
        flo = v[idx].copy()
        for _ in range(48):
            mid = 0.5 * (lo + hi)
            fm = np.broadcast_to(np.asarray(fn(mid), dtype=float), mid.shape)
            left = flo * fm <= 0.0
            hi = np.where(left, mid, hi)
            lo = np.where(left, lo, mid)
            flo = np.where(left, flo, fm)
        roots.extend(float(x) for x in 0.5 * (lo + hi))
    return sorted(roots)


# ---------------------------------------------------------------------------
# Integral norms of kernels

def _abs_integral_over_s(kd: KernelDef, t: float, order: int,
                         quad_cfg: QuadConfig) -> float:
    """Integral over s in [0,1] of |k| (order 0) or |dk/dt| (order 1)."""
    evalf = eval_k if order == 0 else eval_dk
    fn = lambda s: evalf(kd, t, s)
    bps = s_breakpoints(kd, t)
    splits = list(bps)
    edges = [0.0] + bps + [1.0]
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi - lo > 1e-12:
            splits.extend(_sign_roots(fn, lo, hi))
    return integrate(lambda s: np.abs(np.asarray(fn(s), dtype=float)),
                     0.0, 1.0, sorted(splits), quad_cfg)


def recip_m(kd: KernelDef, order: int, quad_cfg: QuadConfig | None = None,
            opt_cfg: Opt1DConfig | None = None) -> float:
    """sup over t in [0,1] of the integral over s of |k| (order 0) or
    |dk/dt| (order 1); this is the quantity 1/m_l, returned directly."""
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    quad_cfg = quad_cfg or QuadConfig()
    g = lambda t: _abs_integral_over_s(kd, float(t), order, quad_cfg)
    value, _ = sup_abs_1d(g, Window(0.0, 1.0), opt_cfg,
                          breakpoints=kd.fixed_breakpoints)
    return value


def recip_M(kd: KernelDef, w: Window, quad_cfg: QuadConfig | None = None,
            opt_cfg: Opt1DConfig | None = None) -> float:
    """inf over t in [a,b] of the signed integral of k(t,s) over s in [a,b];
    this is the quantity 1/M, returned directly."""
    quad_cfg = quad_cfg or QuadConfig()

    def g(t):
        bps = [p for p in s_breakpoints(kd, float(t)) if w.a < p < w.b]
        return integrate(lambda s: eval_k(kd, float(t), s), w.a, w.b, bps, quad_cfg)

    value, _, _ = extremum_1d(g, w.a, w.b, opt_cfg, mode="min",
                              breakpoints=kd.fixed_breakpoints)
    return value


# ---------------------------------------------------------------------------
# Window constants

def _chunked_kernel_grid(kd: KernelDef, ts: np.ndarray, ss: np.ndarray) -> np.ndarray:
    """k evaluated on the ts x ss grid, chunked over s to bound memory."""
    out = np.empty((ts.size, ss.size))
    block = max(1, int(2 ** 21 // max(ts.size, 1)))
    for j0 in range(0, ss.size, block):
        sj = ss[j0:j0 + block]
        T, S = np.meshgrid(ts, sj, indexing="ij")
        out[:, j0:j0 + sj.size] = np.broadcast_to(
            np.asarray(eval_k(kd, T, S), dtype=float), T.shape)
    return out


def _grid_with(points: Sequence[float], a: float, b: float, n: int) -> np.ndarray:
    grid = np.linspace(a, b, n + 1)
    inner = [p for p in points if a < p < b]
    if inner:
        grid = np.unique(np.concatenate((grid, inner)))
    return grid


def c_tilde(kd: KernelDef, w: Window, env: EnvelopeSpec,
            quad_cfg: QuadConfig | None = None,
            opt_cfg: Opt1DConfig | None = None) -> float:
    """Largest c with k(t,s) >= c * Phi0(s) for t in the window.

    Computed as inf over s of (min over window t of k(t,s)) / Phi0(s);
    s-points where Phi0 vanishes are skipped (the inequality is vacuous
    there).  In tight mode Phi0(s) = max over t in [0,1] of |k(t,s)|.  A
    declared envelope is verified to majorize |k| on a dense grid first.
    A nonpositive result means the window positivity condition (C2) fails.
    """
    opt_cfg = opt_cfg or Opt1DConfig()
    ng = min(opt_cfg.coarse_grid, 2048)
    ss = _grid_with(kd.fixed_breakpoints, 0.0, 1.0, ng)
    tw = _grid_with(kd.fixed_breakpoints, w.a, w.b, ng)
    k_win = _chunked_kernel_grid(kd, tw, ss)
    m_win = k_win.min(axis=0)

    if env.mode == "declared":
        phi = np.broadcast_to(
            np.asarray(eval_scalar(env.declared_phi0, {"s": ss}), dtype=float),
            ss.shape).copy()
        tf = _grid_with(kd.fixed_breakpoints, 0.0, 1.0, ng)
        k_full = np.abs(_chunked_kernel_grid(kd, tf, ss))
        worst = np.argmax(k_full.max(axis=0) - phi)
        gap = k_full[:, worst].max() - phi[worst]
        if gap > 1e-9 * max(1.0, abs(phi[worst])):
            raise ModelViolationError(
                "C2", f"declared envelope violated: |k| exceeds Phi0 by "
                      f"{gap:.3e} at s={ss[worst]:.6f}")
    else:
        tf = _grid_with(kd.fixed_breakpoints, 0.0, 1.0, ng)
        phi = np.abs(_chunked_kernel_grid(kd, tf, ss)).max(axis=0)

    mask = phi > 1e-14 * max(1.0, float(phi.max(initial=0.0)))
    if not np.any(mask):
        raise ModelViolationError("C2", "envelope vanishes identically")
    ratios = m_win[mask] / phi[mask]
    j = int(np.argmin(ratios))
    value = float(ratios[j])
    s_best = float(ss[mask][j])

    # refine around the grid infimum with accurate inner extrema
    inner_cfg = Opt1DConfig(coarse_grid=256, refine_tol=opt_cfg.refine_tol)

    def ratio_at(s: float) -> float:
        s = min(max(s, 0.0), 1.0)
        num, _, _ = extremum_1d(lambda t: float(eval_k(kd, t, s)), w.a, w.b,
                                inner_cfg, mode="min", breakpoints=[s])
        if env.mode == "declared":
            den = float(eval_scalar(env.declared_phi0, {"s": s}))
        else:
            den, _ = sup_abs_1d(lambda t: float(eval_k(kd, t, s)),
                                Window(0.0, 1.0), inner_cfg, breakpoints=[s])
        if den <= 1e-14:
            return np.inf
        return num / den

    h = 1.0 / ng
    gx, gv = _golden_min(ratio_at, max(0.0, s_best - h), min(1.0, s_best + h),
                         opt_cfg.refine_tol)
    if gv < value:
        value = float(gv)

    if value <= 0.0:
        raise ModelViolationError(
            "C2", f"window [{w.a}, {w.b}] gives c~ = {value:.6g} <= 0; the "
            "kernel is not bounded below by a positive multiple of its envelope there")
    if value > 1.0 + 1e-9:
        raise ModelViolationError(
            "C2", f"computed c~ = {value:.6g} > 1; the declared envelope does "
            "not majorize |k| (c~ must lie in (0, 1])")
    return min(value, 1.0)


def gamma_c(gamma, w: Window, opt_cfg: Opt1DConfig | None = None) -> float:
    """(min over the window of gamma) / sup over [0,1] of |gamma|."""
    g = lambda t: eval_scalar(gamma, {"t": t})
    sup, _ = sup_abs_1d(g, Window(0.0, 1.0), opt_cfg, vectorized=True)
    if sup <= 0.0:
        raise ModelViolationError("C5", "gamma vanishes identically; its window "
                                         "constant is undefined")
    wmin, _, _ = extremum_1d(g, w.a, w.b, opt_cfg, mode="min", vectorized=True)
    value = wmin / sup
    if value <= 0.0:
        raise ModelViolationError(
            "C5", f"gamma is not positive on the window [{w.a}, {w.b}] "
            f"(min/sup = {value:.6g} <= 0)")
    return min(value, 1.0)


# ---------------------------------------------------------------------------
# Assembly

@dataclass(frozen=True)
class ConstantRecord:
    symbol: str
    computed: float
    declared: float | None
    used: float
    flags: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {"symbol": self.symbol, "computed": self.computed,
                "declared": self.declared, "used": self.used,
                "flags": list(self.flags)}


@dataclass(frozen=True, eq=False)
class ConeConstants:
    """Per-component constants; the ``used`` values feed certificates."""
    window: Window
    c_tilde: float
    c_gamma: tuple[float, ...]
    c: float
    recip_m0: float
    recip_m1: float
    recip_M: float
    gamma_sup: tuple[float, ...]
    dgamma_sup: tuple[float, ...]
    envelope_mode: str
    records: dict

    def record(self, key: str) -> ConstantRecord:
        return self.records[key]


_FLAG = "declared-differs-from-computed"


def _informational(symbol: str, computed: float, declared) -> ConstantRecord:
    """Computed value always wins; a differing declaration is flagged."""
    flags = ()
    if declared is not None and \
            abs(declared - computed) > max(1e-6, 1e-6 * abs(computed)):
        flags = (_FLAG,)
    return ConstantRecord(symbol, computed, declared, computed, flags)


def _overridable(symbol: str, computed: float, declared, *, condition: str) -> ConstantRecord:
    """c-type constant: a declared value at most the computed tight value is
    used in place of it (declaring slack is always sound); anything larger
    is inconsistent and rejected."""
    if declared is None:
        return ConstantRecord(symbol, computed, None, computed)
    if declared <= 0.0:
        raise ModelViolationError(condition, f"declared {symbol} = {declared} must be positive")
    if declared > computed + 1e-9:
        raise ConfigError(symbol, f"declared value {declared} exceeds the computed "
                                  f"tight value {computed:.12g}; overrides may only add slack")
    return ConstantRecord(symbol, computed, declared, declared)


def assemble_cone_constants(spec: "ProblemSpec",
                            quad_cfg: QuadConfig | None = None,
                            opt_cfg: Opt1DConfig | None = None) -> tuple[ConeConstants, ...]:
    """Compute every constant for every component of the problem.

    Declared overrides from the configuration are honored for c-type
    constants when consistent; integral norms and gamma sups are always the
    computed values, with discrepancy flags when a declaration disagrees.
    Results are cached per (spec, configs); the computation is pure.
    """
    return _assemble_cached(spec, quad_cfg or spec.quad, opt_cfg or spec.opt)


@lru_cache(maxsize=8)
def _assemble_cached(spec: "ProblemSpec", quad_cfg: QuadConfig,
                     opt_cfg: Opt1DConfig) -> tuple[ConeConstants, ...]:
    out = []
    for i, comp in enumerate(spec.components, start=1):
        kd = comp.kernel
        w = comp.window
        decl = comp.declared

        records: dict[str, ConstantRecord] = {}
        ct = c_tilde(kd, w, comp.envelope, quad_cfg, opt_cfg)
        records["c_tilde"] = _overridable(f"c~_{i}", ct, decl.get("c_tilde"),
                                          condition="C2")
        cg_records = []
        gs_records = []
        dgs_records = []
        for j, term in enumerate(comp.gammas, start=1):
            cg = gamma_c(term.gamma.gamma, w, opt_cfg)
            cg_records.append(_overridable(
                f"c_{{{i},{j}}}", cg, _nth(decl.get("c_gamma"), j - 1), condition="C5"))
            gsup, _ = sup_abs_1d(lambda t, e=term.gamma.gamma: eval_scalar(e, {"t": t}),
                                 Window(0.0, 1.0), opt_cfg, vectorized=True)
            gs_records.append(_informational(
                f"||gamma_{{{i},{j}}}||_inf", gsup, _nth(decl.get("gamma_sup"), j - 1)))
            dsup, _ = sup_abs_1d(lambda t, e=term.gamma.dgamma: eval_scalar(e, {"t": t}),
                                 Window(0.0, 1.0), opt_cfg, vectorized=True)
            dgs_records.append(_informational(
                f"||gamma_{{{i},{j}}}'||_inf", dsup, _nth(decl.get("dgamma_sup"), j - 1)))
        records.update({f"c_gamma[{j}]": r for j, r in enumerate(cg_records)})
        records.update({f"gamma_sup[{j}]": r for j, r in enumerate(gs_records)})
        records.update({f"dgamma_sup[{j}]": r for j, r in enumerate(dgs_records)})

        if comp.envelope.declared_phi1 is not None:
            _validate_phi1(kd, comp.envelope.declared_phi1, i)

        m0 = recip_m(kd, 0, quad_cfg, opt_cfg)
        m1 = recip_m(kd, 1, quad_cfg, opt_cfg)
        mm = recip_M(kd, w, quad_cfg, opt_cfg)
        records["recip_m0"] = _informational(f"1/m_{{{i},0}}", m0, decl.get("recip_m0"))
        records["recip_m1"] = _informational(f"1/m_{{{i},1}}", m1, decl.get("recip_m1"))
        records["recip_M"] = _informational(f"1/M_{i}", mm, decl.get("recip_M"))

        c_used = min([records["c_tilde"].used] + [r.used for r in cg_records])
        records["c"] = ConstantRecord(f"c_{i}", c_used, None, c_used)

        if _kernel_nonneg_on_window(kd, w) and m0 < mm - 1e-9:
            raise ModelViolationError(
                "C2", f"component {i}: 1/m_0 = {m0:.12g} < 1/M = {mm:.12g} with a "
                "nonnegative kernel on the window; the computed constants are inconsistent")

        out.append(ConeConstants(
            window=w,
            c_tilde=records["c_tilde"].used,
            c_gamma=tuple(r.used for r in cg_records),
            c=c_used,
            recip_m0=m0, recip_m1=m1, recip_M=mm,
            gamma_sup=tuple(r.used for r in gs_records),
            dgamma_sup=tuple(r.used for r in dgs_records),
            envelope_mode=comp.envelope.mode,
            records=records))
    return tuple(out)


def _nth(seq, j):
    if seq is None:
        return None
    return seq[j] if j < len(seq) else None


def _validate_phi1(kd: KernelDef, phi1, comp_index: int, grid: int = 401) -> None:
    """A declared dk-majorant must dominate |dk/dt| on a dense grid (C3);
    the band around the moving jump s = t is not excluded because both
    one-sided values stay below any valid majorant."""
    ss = _grid_with(kd.fixed_breakpoints, 0.0, 1.0, grid)
    ts = np.linspace(0.0, 1.0, grid + 1)
    T, S = np.meshgrid(ts, ss, indexing="ij")
    dk = np.abs(np.broadcast_to(np.asarray(eval_dk(kd, T, S), dtype=float), T.shape))
    phi = np.broadcast_to(np.asarray(eval_scalar(phi1, {"s": ss}), dtype=float),
                          ss.shape)
    gap = (dk - phi[None, :]).max()
    if gap > 1e-9:
        raise ModelViolationError(
            "C3", f"component {comp_index}: declared Phi1 is exceeded by "
                  f"|dk/dt| by {gap:.3e}")


def _kernel_nonneg_on_window(kd: KernelDef, w: Window, grid: int = 201) -> bool:
    ts = _grid_with(kd.fixed_breakpoints, w.a, w.b, grid)
    ss = _grid_with(kd.fixed_breakpoints, 0.0, 1.0, grid)
    return bool(_chunked_kernel_grid(kd, ts, ss).min() >= -1e-12)


def constants_report(spec: "ProblemSpec", cc: Sequence[ConeConstants],
                     opt_cfg: Opt1DConfig | None = None) -> dict:
    """JSON-ready report listing every constant with computed value, declared
    value, the value certificates will use, and discrepancy flags."""
    opt_cfg = opt_cfg or spec.opt
    components = []
    for i, (comp, cci) in enumerate(zip(spec.components, cc), start=1):
        entry = {
            "component": i,
            "window": [cci.window.a, cci.window.b],
            "envelope_mode": cci.envelope_mode,
            "constants": {key: rec.as_dict() for key, rec in sorted(cci.records.items())},
        }
        components.append(entry)
    flags = [
        {"component": i, "constant": key, **rec.as_dict()}
        for i, cci in enumerate(cc, start=1)
        for key, rec in sorted(cci.records.items()) if rec.flags
    ]
    return {
        "grid_resolution": 1.0 / opt_cfg.coarse_grid,
        "notes": [RECIP_M_READING_NOTE],
        "components": components,
        "discrepancies": flags,
    }
