"""Nystrom discretization of the integral operator and damped Picard iteration.

The operator

    T_i(u)(t) = lambda_i * integral k_i(t,s) f_i(s, u(s), u'(s), w_i[u]) ds
                + sum_j eta_ij gamma_ij(t) h_ij[u]

is discretized by a composite Gauss-Legendre product rule whose panels are
the state's node intervals.  Node intervals refine every kernel breakpoint
(fixed breakpoints must coincide with nodes, which is validated; the moving
breakpoint s = t_j is itself a node), so each panel integrand is smooth and
the fixed rule is exact to machine precision for the bundled kernels.  The
kernel matrices k_i(t_j, s_q) and dk_i/dt(t_j, s_q) do not change between
iterations and are precomputed once, making one application two matrix-
vector products per component.

The functional values w_i[u] and h_ij[u] are frozen per application, so the
iteration is Picard in the functional terms as well.  Damped iteration
u <- (1-alpha) u + alpha T(u) runs until the discrete C1 residual meets the
tolerance; on stagnation the damping is halved once before the run is
declared non-convergent.  Non-convergence is a reportable outcome, not a
crash: the certificates guarantee existence, not Picard-attractivity.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .cone import DiscreteState, MembershipVerdict, StateNorms, c1_norm, \
    cone_membership, constant_state, zero_state
from .constants import ConeConstants
from .errors import (ConfigError, EvalDomainError, ModelViolationError,
                     QuadratureError)
from .expr import eval_functional, eval_scalar
from .quad import QuadConfig, composite_rule

if TYPE_CHECKING:
    from .problem import Params, ProblemSpec

__all__ = ["SolverConfig", "SolveReport", "apply_T", "residual",
           "solve_fixed_point", "localization_check"]


@dataclass(frozen=True)
class SolverConfig:
    nodes: int = 128              # number of panels N; the state has N+1 nodes
    damping: float = 0.5          # alpha in (0, 1]
    tol: float = 1e-10            # residual tolerance in the discrete C1 norm
    max_iterations: int = 10000
    initial: str = "zero"         # "zero" | "constant"
    initial_constant: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.damping <= 1.0):
            raise ValueError("damping must lie in (0, 1]")
        if self.nodes < 8:
            raise ValueError("need at least 8 panels")
        if self.initial not in ("zero", "constant"):
            raise ValueError("initial must be 'zero' or 'constant'")


class _NystromOperator:
    """Precomputed kernel matrices for a fixed node count and Gauss order."""

    def __init__(self, spec: "ProblemSpec", num_panels: int, gauss_order: int):
        from .kernels import eval_dk, eval_k  # local to avoid import noise

        self.spec = spec
        nodes = np.linspace(0.0, 1.0, num_panels + 1)
        for comp_idx, comp in enumerate(spec.components):
            for bp in comp.kernel.fixed_breakpoints:
                if np.min(np.abs(nodes - bp)) > 1e-12:
                    raise ConfigError(
                        f"components[{comp_idx}].kernel.breakpoints",
                        f"fixed breakpoint {bp} does not coincide with a node of the "
                        f"uniform {num_panels}-panel grid; choose a node count that "
                        "contains every kernel breakpoint")
        self.nodes = nodes
        pts, wts = composite_rule(0.0, 1.0, nodes[1:-1], gauss_order)
        self.pts = pts
        self.wts = wts
        self.k_val = []
        self.k_der = []
        self.gamma_val = []
        self.gamma_der = []
        T, S = np.meshgrid(nodes, pts, indexing="ij")
        for comp in spec.components:
            self.k_val.append(np.broadcast_to(
                np.asarray(eval_k(comp.kernel, T, S), dtype=float), T.shape).copy())
            self.k_der.append(np.broadcast_to(
                np.asarray(eval_dk(comp.kernel, T, S), dtype=float), T.shape).copy())
            self.gamma_val.append([np.broadcast_to(np.asarray(
                eval_scalar(g.gamma.gamma, {"t": nodes}), dtype=float), nodes.shape)
                for g in comp.gammas])
            self.gamma_der.append([np.broadcast_to(np.asarray(
                eval_scalar(g.gamma.dgamma, {"t": nodes}), dtype=float), nodes.shape)
                for g in comp.gammas])

    def apply(self, u: DiscreteState, params: "Params",
              quad: QuadConfig) -> DiscreteState:
        spec = self.spec
        n = spec.n
        uq = [u.value(i, self.pts) for i in range(n)]
        duq = [u.derivative(i, self.pts) for i in range(n)]
        values = np.zeros((n, self.nodes.size))
        derivs = np.zeros_like(values)
        for i, comp in enumerate(spec.components):
            lam = params.lambdas[i]
            if lam > 0.0:
                w_i = eval_functional(comp.w, u, quad, nonneg_condition="C8")
                env = {"t": self.pts, "w": w_i}
                for k in range(n):
                    env[f"u{k + 1}"] = uq[k]
                    env[f"du{k + 1}"] = duq[k]
                F = np.broadcast_to(np.asarray(eval_scalar(comp.f, env), dtype=float),
                                    self.pts.shape)
                fmin = float(F.min())
                if fmin < -1e-12:
                    j = int(np.argmin(F))
                    raise ModelViolationError(
                        "C4", f"nonlinearity of component {i + 1} is negative "
                              f"({fmin:.3e}) at s={self.pts[j]:.6f}")
                wf = self.wts * F
                values[i] += lam * (self.k_val[i] @ wf)
                derivs[i] += lam * (self.k_der[i] @ wf)
            for j, term in enumerate(comp.gammas):
                eta = params.etas[i][j]
                if eta > 0.0:
                    h_ij = eval_functional(term.h, u, quad, nonneg_condition="C7")
                    values[i] += eta * h_ij * self.gamma_val[i][j]
                    derivs[i] += eta * h_ij * self.gamma_der[i][j]
        return DiscreteState(self.nodes, values, derivs)


@lru_cache(maxsize=8)
def _operator(spec: "ProblemSpec", num_panels: int, gauss_order: int) -> _NystromOperator:
    return _NystromOperator(spec, num_panels, gauss_order)


def _effective_params(spec: "ProblemSpec", params: "Params | None") -> "Params":
    if params is not None:
        return params
    from .problem import Params
    return Params.from_spec(spec)


def apply_T(spec: "ProblemSpec", u: DiscreteState,
            quad: QuadConfig | None = None,
            params: "Params | None" = None) -> DiscreteState:
    """One application of the integral operator to a discrete state."""
    quad = quad or spec.quad
    op = _operator(spec, u.num_panels, quad.gauss_order)
    return op.apply(u, _effective_params(spec, params), quad)


def residual(spec: "ProblemSpec", u: DiscreteState,
             quad: QuadConfig | None = None,
             params: "Params | None" = None) -> float:
    """Discrete C1 norm of T(u) - u."""
    Tu = apply_T(spec, u, quad, params)
    diff = DiscreteState(u.nodes, Tu.values - u.values,
                         Tu.derivatives - u.derivatives)
    return c1_norm(diff).overall


@dataclass
class SolveReport:
    state: DiscreteState
    residual: float
    iterations: int
    converged: bool
    norms: StateNorms
    damping_final: float
    membership: MembershipVerdict | None = None
    localization: bool | None = None
    rho_interval: tuple[float, float] | None = None
    notes: tuple[str, ...] = ()

    constants_used: dict | None = None

    def as_dict(self) -> dict:
        d = {
            "converged": self.converged,
            "residual": self.residual,
            "iterations": self.iterations,
            "damping_final": self.damping_final,
            "norms": {
                "sup": list(self.norms.sup),
                "sup_deriv": list(self.norms.sup_deriv),
                "c1": list(self.norms.c1),
                "overall": self.norms.overall,
            },
            "notes": list(self.notes),
        }
        if self.membership is not None:
            d["cone_member"] = self.membership.member
            d["cone_margins"] = list(self.membership.margins)
            d["constants_used"] = self.constants_used
        if self.rho_interval is not None:
            d["rho_interval"] = list(self.rho_interval)
            d["localized"] = self.localization
        return d


STAGNATION_WINDOW = 50
STAGNATION_FACTOR = 0.99  # less than 1% reduction over the window


def solve_fixed_point(spec: "ProblemSpec", cfg: SolverConfig | None = None,
                      quad: QuadConfig | None = None,
                      params: "Params | None" = None,
                      cc: Sequence[ConeConstants] | None = None,
                      rho_interval: tuple[float, float] | None = None,
                      initial_state: DiscreteState | None = None,
                      membership_slack: float = 1e-9) -> SolveReport:
    """Damped Picard iteration u <- (1-alpha) u + alpha T(u).

    Stops when the C1 residual meets cfg.tol; on stagnation the damping is
    halved once, after which a second stagnation ends the run unconverged.
    When cone constants are supplied the report carries the membership
    verdict of the final state, and with ``rho_interval`` the localization
    verdict rho1 <= ||u|| <= rho2.
    """
    cfg = cfg or spec.solver
    quad = quad or spec.quad
    params = _effective_params(spec, params)
    if initial_state is not None:
        u = initial_state
    elif cfg.initial == "constant":
        u = constant_state([cfg.initial_constant] * spec.n, cfg.nodes)
    else:
        u = zero_state(spec.n, cfg.nodes)

    alpha = cfg.damping
    halved = False
    notes: list[str] = []
    history: list[float] = []
    res = np.inf
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iterations + 1):
        try:
            Tu = apply_T(spec, u, quad, params)
        except (EvalDomainError, QuadratureError) as e:
            # blow-up of a diverging iteration is a numerical outcome,
            # not a crash; model violations still propagate
            notes.append(f"iteration diverged at step {iterations}: {e}")
            break
        diff = DiscreteState(u.nodes, Tu.values - u.values,
                             Tu.derivatives - u.derivatives)
        res = c1_norm(diff).overall
        if res <= cfg.tol:
            converged = True
            break
        history.append(res)
        if len(history) > STAGNATION_WINDOW and \
                res > STAGNATION_FACTOR * history[-1 - STAGNATION_WINDOW]:
            if not halved:
                halved = True
                alpha = alpha / 2.0
                history.clear()
                notes.append(f"stagnation at iteration {iterations}; damping halved "
                             f"to {alpha}")
            else:
                notes.append(f"stagnation persisted at iteration {iterations} after "
                             "halving the damping; giving up")
                break
        u = DiscreteState(u.nodes, (1 - alpha) * u.values + alpha * Tu.values,
                          (1 - alpha) * u.derivatives + alpha * Tu.derivatives)

    if not converged:
        notes.append(f"not converged: residual {res:.3e} > tol {cfg.tol:.1e}")
    else:
        # independent recomputation; must reproduce the reported residual
        res_check = residual(spec, u, quad, params)
        if abs(res_check - res) > 1e-12:
            notes.append(f"residual recheck drifted: {res_check!r} vs {res!r}")
        res = res_check

    norms = c1_norm(u)
    membership = None
    constants_used = None
    if cc is not None:
        membership = cone_membership(u, cc, membership_slack)
        constants_used = {cci.record("c").symbol: cci.c for cci in cc}
    localization = None
    if rho_interval is not None:
        localization = bool(rho_interval[0] <= norms.overall <= rho_interval[1])
    return SolveReport(state=u, residual=res, iterations=iterations,
                       converged=converged, norms=norms, damping_final=alpha,
                       membership=membership, localization=localization,
                       rho_interval=rho_interval, notes=tuple(notes),
                       constants_used=constants_used)


def localization_check(report: SolveReport, rho1: float, rho2: float) -> bool:
    """True iff the solved state satisfies rho1 <= ||u|| <= rho2."""
    return bool(rho1 <= report.norms.overall <= rho2)
