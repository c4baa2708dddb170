"""Discrete C1 states, the product-space norm, and cone machinery.

A candidate solution of an n-component system is stored as values and
derivative values on a shared uniform node vector over [0,1]; between nodes
the function is the piecewise cubic Hermite interpolant of the (value,
derivative) pairs, which is C1 by construction.  Sup norms are taken over an
8x oversampled monitoring grid (exact at nodes, a lower bound of the true
sup with O(h^4) defect).

The cone of interest consists of vectors whose i-th component satisfies
min over the window [a_i, b_i] of u_i >= c_i * sup|u_i|; components may
change sign outside their window.  The boundary sampler draws random trig
polynomials, shifts them into the cone and rescales onto ||u|| = rho; it is
meant for falsification and property tests, not for exhausting the boundary.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .constants import ConeConstants

if TYPE_CHECKING:
    from .problem import ProblemSpec

__all__ = ["DiscreteState", "StateNorms", "c1_norm", "cone_membership",
           "MembershipVerdict", "sample_cone_boundary", "state_to_csv",
           "state_from_csv", "zero_state", "constant_state", "state_from_callables"]

MONITOR_FACTOR = 8  # monitoring grid has MONITOR_FACTOR*N + 1 points


@dataclass(eq=False)
class DiscreteState:
    nodes: np.ndarray          # shape (N+1,), uniform, includes 0 and 1
    values: np.ndarray         # shape (n, N+1)
    derivatives: np.ndarray    # shape (n, N+1)
    functional_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        self.derivatives = np.atleast_2d(np.asarray(self.derivatives, dtype=float))
        if self.nodes.size < 9:
            raise ValueError("need at least 9 nodes")
        if self.nodes[0] != 0.0 or self.nodes[-1] != 1.0:
            raise ValueError("nodes must span [0, 1]")
        h = np.diff(self.nodes)
        if not np.allclose(h, h[0], rtol=0, atol=1e-12):
            raise ValueError("nodes must be uniform")
        if self.values.shape != (self.n, self.nodes.size) or \
                self.derivatives.shape != self.values.shape:
            raise ValueError("values/derivatives must have shape (n, N+1)")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def num_panels(self) -> int:
        return self.nodes.size - 1

    def interior_nodes(self) -> np.ndarray:
        return self.nodes[1:-1]

    def _locate(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.nodes, x, side="right") - 1,
                      0, self.nodes.size - 2)
        h = self.nodes[1] - self.nodes[0]
        tau = (x - self.nodes[idx]) / h
        return idx, tau, h

    def value(self, comp: int, x):
        """Hermite interpolant of component ``comp`` (0-based) at x."""
        idx, tau, h = self._locate(x)
        u0 = self.values[comp, idx]
        u1 = self.values[comp, idx + 1]
        d0 = self.derivatives[comp, idx]
        d1 = self.derivatives[comp, idx + 1]
        t2 = tau * tau
        t3 = t2 * tau
        return (u0 * (2 * t3 - 3 * t2 + 1) + h * d0 * (t3 - 2 * t2 + tau)
                + u1 * (-2 * t3 + 3 * t2) + h * d1 * (t3 - t2))

    def derivative(self, comp: int, x):
        """Derivative of the Hermite interpolant; matches the stored
        derivative values exactly at nodes."""
        idx, tau, h = self._locate(x)
        u0 = self.values[comp, idx]
        u1 = self.values[comp, idx + 1]
        d0 = self.derivatives[comp, idx]
        d1 = self.derivatives[comp, idx + 1]
        t2 = tau * tau
        return (u0 * (6 * t2 - 6 * tau) / h + d0 * (3 * t2 - 4 * tau + 1)
                + u1 * (-6 * t2 + 6 * tau) / h + d1 * (3 * t2 - 2 * tau))

    def monitor_grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, MONITOR_FACTOR * self.num_panels + 1)

    def copy_with(self, values: np.ndarray, derivatives: np.ndarray) -> "DiscreteState":
        return DiscreteState(self.nodes, values, derivatives)


def zero_state(n: int, num_panels: int = 128) -> DiscreteState:
    nodes = np.linspace(0.0, 1.0, num_panels + 1)
    z = np.zeros((n, num_panels + 1))
    return DiscreteState(nodes, z, z.copy())


def constant_state(consts: Sequence[float], num_panels: int = 128) -> DiscreteState:
    nodes = np.linspace(0.0, 1.0, num_panels + 1)
    vals = np.repeat(np.asarray(consts, dtype=float)[:, None], num_panels + 1, axis=1)
    return DiscreteState(nodes, vals, np.zeros_like(vals))


def state_from_callables(fns, dfns, num_panels: int = 128) -> DiscreteState:
    """Build a state by sampling callables (value, derivative) at the nodes."""
    nodes = np.linspace(0.0, 1.0, num_panels + 1)
    vals = np.vstack([np.broadcast_to(np.asarray(f(nodes), dtype=float), nodes.shape)
                      for f in fns])
    ders = np.vstack([np.broadcast_to(np.asarray(f(nodes), dtype=float), nodes.shape)
                      for f in dfns])
    return DiscreteState(nodes, vals, ders)


# ---------------------------------------------------------------------------
# Norms

@dataclass(frozen=True)
class StateNorms:
    sup: tuple[float, ...]       # ||u_i||_inf per component
    sup_deriv: tuple[float, ...]  # ||u_i'||_inf per component
    c1: tuple[float, ...]         # max of the two per component
    overall: float                # max over components


def c1_norm(u: DiscreteState) -> StateNorms:
    grid = u.monitor_grid()
    sup, supd, c1 = [], [], []
    for i in range(u.n):
        si = float(np.max(np.abs(u.value(i, grid))))
        di = float(np.max(np.abs(u.derivative(i, grid))))
        sup.append(si)
        supd.append(di)
        c1.append(max(si, di))
    return StateNorms(tuple(sup), tuple(supd), tuple(c1), max(c1))


# ---------------------------------------------------------------------------
# Cone membership

@dataclass(frozen=True)
class MembershipVerdict:
    member: bool
    margins: tuple[float, ...]   # min over window of u_i - c_i ||u_i||_inf


def cone_membership(u: DiscreteState, cc: Sequence[ConeConstants],
                    slack: float = 1e-12) -> MembershipVerdict:
    """Check min over [a_i,b_i] of u_i >= c_i * ||u_i||_inf per component.

    The default slack absorbs interpolation error on the monitoring grid.
    """
    if len(cc) != u.n:
        raise ValueError("one ConeConstants record per component required")
    grid = u.monitor_grid()
    margins = []
    for i, cci in enumerate(cc):
        a, b = cci.window.a, cci.window.b
        wgrid = grid[(grid >= a) & (grid <= b)]
        wgrid = np.unique(np.concatenate((wgrid, [a, b])))
        window_min = float(np.min(u.value(i, wgrid)))
        sup = float(np.max(np.abs(u.value(i, grid))))
        margins.append(window_min - cci.c * sup)
    member = all(m >= -slack for m in margins)
    return MembershipVerdict(member, tuple(margins))


# ---------------------------------------------------------------------------
# Boundary sampling

TRIG_DEGREE = 6


def _random_trig(rng: np.random.Generator, nodes: np.ndarray):
    """Random trig polynomial of degree <= TRIG_DEGREE with coefficients
    drawn from the symmetric unit distribution; returns (values, derivatives)."""
    a = rng.uniform(-1.0, 1.0, TRIG_DEGREE + 1)
    b = rng.uniform(-1.0, 1.0, TRIG_DEGREE)
    vals = np.full_like(nodes, a[0])
    ders = np.zeros_like(nodes)
    for d in range(1, TRIG_DEGREE + 1):
        w = 2.0 * np.pi * d
        vals += a[d] * np.cos(w * nodes) + b[d - 1] * np.sin(w * nodes)
        ders += w * (-a[d] * np.sin(w * nodes) + b[d - 1] * np.cos(w * nodes))
    return vals, ders


def sample_cone_boundary(spec: "ProblemSpec", cc: Sequence[ConeConstants],
                         rho: float, seed: int, num_panels: int = 128) -> DiscreteState:
    """Draw a state on the cone boundary with ||u|| = rho exactly.

    Per component: draw a trig polynomial v, add the smallest constant shift
    that restores min over the window >= c * sup, then rescale the whole
    vector so the product norm equals rho (membership is invariant under
    positive scaling).
    """
    return sample_cone_boundary_rng(spec, cc, rho, np.random.default_rng(seed),
                                    num_panels)


def sample_cone_boundary_rng(spec: "ProblemSpec", cc: Sequence[ConeConstants],
                             rho: float, rng: np.random.Generator,
                             num_panels: int = 128) -> DiscreteState:
    if rho <= 0.0:
        raise ValueError("rho must be positive")
    nodes = np.linspace(0.0, 1.0, num_panels + 1)
    for _ in range(100):
        values = np.empty((len(cc), nodes.size))
        derivs = np.empty_like(values)
        for i, cci in enumerate(cc):
            if cci.c >= 1.0 - 1e-12:
                # the cone degenerates to positive constants on the window
                values[i] = rng.uniform(0.1, 1.0)
                derivs[i] = 0.0
                continue
            vals, ders = _random_trig(rng, nodes)
            values[i] = vals
            derivs[i] = ders
        u = DiscreteState(nodes, values, derivs)
        grid = u.monitor_grid()
        for i, cci in enumerate(cc):
            if cci.c >= 1.0 - 1e-12:
                continue
            a, b = cci.window.a, cci.window.b
            wgrid = grid[(grid >= a) & (grid <= b)]
            wgrid = np.unique(np.concatenate((wgrid, [a, b])))
            sup = float(np.max(np.abs(u.value(i, grid))))
            wmin = float(np.min(u.value(i, wgrid)))
            shift = max(0.0, (cci.c * sup - wmin) / (1.0 - cci.c))
            values[i] += shift
        u = DiscreteState(nodes, values, derivs)
        norm = c1_norm(u).overall
        if norm <= 1e-12:
            continue
        scale = rho / norm
        return DiscreteState(nodes, values * scale, derivs * scale)
    raise RuntimeError("degenerate draws 100 times in a row")


# ---------------------------------------------------------------------------
# CSV serialization: columns t, u1, du1, ..., un, dun

def state_to_csv(u: DiscreteState, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["t"]
        for i in range(u.n):
            header += [f"u{i + 1}", f"du{i + 1}"]
        writer.writerow(header)
        for j, t in enumerate(u.nodes):
            row = [repr(float(t))]
            for i in range(u.n):
                row += [repr(float(u.values[i, j])), repr(float(u.derivatives[i, j]))]
            writer.writerow(row)


def state_from_csv(path) -> DiscreteState:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    n = (len(header) - 1) // 2
    arr = np.asarray(data, dtype=float)
    nodes = arr[:, 0]
    values = arr[:, 1::2].T
    derivatives = arr[:, 2::2].T
    return DiscreteState(nodes, values[:n], derivatives[:n])
