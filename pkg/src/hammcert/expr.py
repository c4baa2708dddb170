"""Expression DSL for kernels, boundary functions, nonlinearities and functionals.

Two grammars share one tokenizer and one recursive-descent core:

* scalar expressions -- arithmetic over named variables, used for kernels
  k(t,s), kernel t-derivatives, boundary functions gamma(t) and
  nonlinearities f(t, u1..un, du1..dun, w);
* functional expressions -- scalar grammar without free variables, extended
  with the atoms ``val(i, t0)`` (component value u_i(t0)), ``der(i, t0)``
  (derivative u_i'(t0)) and ``int(body)`` (integral of ``body`` over [0,1],
  body being a scalar expression over {s, u1..un, du1..dun}).

Precedence is conventional: ``^`` over ``*``/``/`` over ``+``/``-``, all
left-associative except ``^`` which is right-associative; unary minus binds
between ``^`` and ``*``.  ``pos(x)`` is max(x, 0) and ``step(x)`` is 1 for
x > 0, otherwise 0 (the value at 0 is 0; integrable jumps are handled by
quadrature panel splitting, never by the point value).

ASTs are immutable after parse and evaluation is pure, so expressions are
safe to evaluate concurrently.  Evaluation accepts numpy arrays in the
environment and broadcasts.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Union

import numpy as np

from .errors import DslSyntaxError, EvalDomainError, ModelViolationError
from .quad import QuadConfig, integrate

if TYPE_CHECKING:
    from .cone import DiscreteState

__all__ = [
    "Num", "Const", "Var", "Unary", "Bin", "Val", "Der", "Integral",
    "ScalarExpr", "FunctionalExpr",
    "KERNEL_CONTEXT", "BOUNDARY_CONTEXT", "ENVELOPE_CONTEXT",
    "nonlinearity_context", "int_body_context",
    "parse_expr", "parse_functional", "parse_constant",
    "eval_scalar", "eval_functional", "render", "variables_of",
]


# ---------------------------------------------------------------------------
# AST nodes


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Const:
    name: str  # 'e' or 'pi'


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # neg | exp | log | abs | sqrt | pos | step
    arg: "ScalarExpr"


@dataclass(frozen=True)
class Bin:
    op: str  # + - * / ^
    left: "ScalarExpr"
    right: "ScalarExpr"


@dataclass(frozen=True)
class Val:
    """Point evaluation u_i(t0); component index is 1-based."""
    index: int
    t0: float


@dataclass(frozen=True)
class Der:
    """Point evaluation of the derivative u_i'(t0); 1-based index."""
    index: int
    t0: float


@dataclass(frozen=True)
class Integral:
    """Integral over [0,1] of a scalar body in the {s, u*, du*} context."""
    body: "ScalarExpr"


ScalarExpr = Union[Num, Const, Var, Unary, Bin]
FunctionalExpr = Union[Num, Const, Unary, Bin, Val, Der, Integral]

_CONSTANTS = {"e": math.e, "pi": math.pi}
_FUNCTIONS = ("exp", "log", "abs", "sqrt", "pos", "step")

KERNEL_CONTEXT = frozenset({"t", "s"})
BOUNDARY_CONTEXT = frozenset({"t"})
ENVELOPE_CONTEXT = frozenset({"s"})


def nonlinearity_context(n: int) -> frozenset:
    """Variables available to a nonlinearity f: the point variable t, the
    component values u1..un, derivatives du1..dun, and the functional value w."""
    names = {"t", "w"}
    for i in range(1, n + 1):
        names.add(f"u{i}")
        names.add(f"du{i}")
    return frozenset(names)


def int_body_context(n: int) -> frozenset:
    """Variables available inside an int(...) body: s, u1..un, du1..dun."""
    names = {"s"}
    for i in range(1, n + 1):
        names.add(f"u{i}")
        names.add(f"du{i}")
    return frozenset(names)


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.lastgroup is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise DslSyntaxError(f"unexpected character {stripped[0]!r}", text, pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


# ---------------------------------------------------------------------------
# Parser

class _Parser:
    def __init__(self, text: str, context: frozenset, *, n: int | None = None,
                 mode: str = "scalar"):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.context = context
        self.n = n
        self.mode = mode  # scalar | functional | intbody

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, op: str):
        kind, textv, pos = self.peek()
        if kind != "op" or textv != op:
            raise DslSyntaxError(f"expected {op!r}", self.text, pos)
        return self.take()

    def fail(self, message: str):
        raise DslSyntaxError(message, self.text, self.peek()[2])

    # expr := term (('+'|'-') term)*
    def expr(self):
        node = self.term()
        while True:
            kind, textv, _ = self.peek()
            if kind == "op" and textv in "+-":
                self.take()
                node = Bin(textv, node, self.term())
            else:
                return node

    # term := unary (('*'|'/') unary)*
    def term(self):
        node = self.unary()
        while True:
            kind, textv, _ = self.peek()
            if kind == "op" and textv in "*/":
                self.take()
                node = Bin(textv, node, self.unary())
            else:
                return node

    # unary := '-' unary | '+' unary | power
    def unary(self):
        kind, textv, _ = self.peek()
        if kind == "op" and textv == "-":
            self.take()
            return Unary("neg", self.unary())
        if kind == "op" and textv == "+":
            self.take()
            return self.unary()
        return self.power()

    # power := atom ('^' unary)?      (right-associative)
    def power(self):
        node = self.atom()
        kind, textv, _ = self.peek()
        if kind == "op" and textv == "^":
            self.take()
            return Bin("^", node, self.unary())
        return node

    def atom(self):
        kind, textv, pos = self.take()
        if kind == "num":
            return Num(float(textv))
        if kind == "op" and textv == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            nxt_kind, nxt_text, _ = self.peek()
            is_call = nxt_kind == "op" and nxt_text == "("
            if is_call:
                if textv in _FUNCTIONS:
                    self.take()
                    arg = self.expr()
                    self.expect(")")
                    return Unary(textv, arg)
                if textv in ("val", "der", "int"):
                    if self.mode == "intbody":
                        raise DslSyntaxError(
                            "nested int(...) is not allowed" if textv == "int"
                            else f"{textv}(...) is not allowed inside an int body "
                                 "(use the u/du variables instead)",
                            self.text, pos)
                    if self.mode != "functional":
                        raise DslSyntaxError(
                            f"{textv}(...) is only valid in functional expressions",
                            self.text, pos)
                    return self._functional_atom(textv, pos)
                raise DslSyntaxError(f"unknown function {textv!r}", self.text, pos)
            if textv in _CONSTANTS:
                return Const(textv)
            if textv in self.context:
                return Var(textv)
            if self._looks_like_variable(textv):
                raise DslSyntaxError(
                    f"variable {textv!r} not allowed in this context "
                    f"(allowed: {sorted(self.context)})", self.text, pos)
            raise DslSyntaxError(f"unknown identifier {textv!r}", self.text, pos)
        raise DslSyntaxError("expected a value", self.text, pos)

    @staticmethod
    def _looks_like_variable(name: str) -> bool:
        return name in ("t", "s", "w") or re.fullmatch(r"d?u\d+", name) is not None

    def _functional_atom(self, head: str, pos: int):
        self.take()  # '('
        if head == "int":
            body_parser = _Parser(self.text, int_body_context(self.n), n=self.n,
                                  mode="intbody")
            body_parser.tokens = self.tokens
            body_parser.i = self.i
            body = body_parser.expr()
            self.i = body_parser.i
            self.expect(")")
            return Integral(body)
        # val(i, t0) / der(i, t0): i an integer literal, t0 a constant expression
        kind, textv, ipos = self.take()
        if kind != "num" or not float(textv).is_integer():
            raise DslSyntaxError(f"{head}: component index must be an integer",
                                 self.text, ipos)
        index = int(float(textv))
        if not (1 <= index <= self.n):
            raise DslSyntaxError(
                f"{head}: component index {index} out of range 1..{self.n}",
                self.text, ipos)
        self.expect(",")
        t0_parser = _Parser(self.text, frozenset(), n=self.n)
        t0_parser.tokens = self.tokens
        t0_parser.i = self.i
        t0_expr = t0_parser.expr()
        self.i = t0_parser.i
        self.expect(")")
        t0 = float(eval_scalar(t0_expr, {}))
        if not (0.0 <= t0 <= 1.0):
            raise DslSyntaxError(f"{head}: evaluation point {t0} outside [0,1]",
                                 self.text, pos)
        return (Val if head == "val" else Der)(index, t0)


def parse_expr(text: str, context: frozenset) -> ScalarExpr:
    """Parse a scalar expression whose variables must lie in ``context``."""
    if not text or not text.strip():
        raise DslSyntaxError("empty expression", text or "", 0)
    p = _Parser(text, frozenset(context))
    node = p.expr()
    kind, _, pos = p.peek()
    if kind != "end":
        raise DslSyntaxError("trailing input", text, pos)
    return node


def parse_functional(text: str, n: int) -> FunctionalExpr:
    """Parse a functional expression for an n-component system.

    The outer level has no free variables; state enters only through the
    val/der/int atoms.  int(...) may not be nested inside another int.
    """
    if not text or not text.strip():
        raise DslSyntaxError("empty expression", text or "", 0)
    p = _Parser(text, frozenset(), n=n, mode="functional")
    node = p.expr()
    kind, _, pos = p.peek()
    if kind != "end":
        raise DslSyntaxError("trailing input", text, pos)
    return node


def parse_constant(value, key: str = "<constant>") -> float:
    """Accept a JSON number or a constant DSL string such as ``"1/(1+e)"``."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, str):
        return float(eval_scalar(parse_expr(value, frozenset()), {}))
    raise DslSyntaxError(f"{key}: expected a number or constant expression", str(value), 0)


# ---------------------------------------------------------------------------
# Evaluation

def _check_finite(value, node):
    arr = np.asarray(value)
    if not np.all(np.isfinite(arr)):
        raise EvalDomainError("non-finite result", render(node))
    return value


def eval_scalar(expr: ScalarExpr, env: Mapping[str, object]):
    """Evaluate in double precision; env values may be floats or numpy arrays.

    Raises EvalDomainError naming the offending subexpression for log of a
    nonpositive value, sqrt of a negative value, or division by zero.
    """
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Const):
        return _CONSTANTS[expr.name]
    if isinstance(expr, Var):
        try:
            return env[expr.name]
        except KeyError:
            raise EvalDomainError(f"unbound variable {expr.name!r}", expr.name) from None
    if isinstance(expr, Unary):
        x = eval_scalar(expr.arg, env)
        op = expr.op
        if op == "neg":
            return -x if not isinstance(x, np.ndarray) else np.negative(x)
        if op == "exp":
            with np.errstate(over="ignore"):
                return _check_finite(np.exp(x), expr)
        if op == "log":
            if np.any(np.asarray(x) <= 0.0):
                raise EvalDomainError("log of a nonpositive value", render(expr))
            return np.log(x)
        if op == "abs":
            return np.abs(x)
        if op == "sqrt":
            if np.any(np.asarray(x) < 0.0):
                raise EvalDomainError("sqrt of a negative value", render(expr))
            return np.sqrt(x)
        if op == "pos":
            return np.maximum(x, 0.0)
        if op == "step":
            return np.where(np.asarray(x) > 0.0, 1.0, 0.0) if isinstance(x, np.ndarray) \
                else (1.0 if x > 0.0 else 0.0)
        raise AssertionError(op)
    if isinstance(expr, Bin):
        a = eval_scalar(expr.left, env)
        b = eval_scalar(expr.right, env)
        op = expr.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if np.any(np.asarray(b) == 0.0):
                raise EvalDomainError("division by zero", render(expr))
            return a / b
        if op == "^":
            with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
                r = np.power(a, b)
            return _check_finite(r, expr)
        raise AssertionError(op)
    raise TypeError(f"not a scalar expression: {expr!r}")


def eval_functional(fx: FunctionalExpr, u: "DiscreteState",
                    quad: QuadConfig | None = None, *,
                    nonneg_condition: str | None = None) -> float:
    """Evaluate a functional on a discrete state.

    val/der atoms use the state's C1 interpolant; int atoms integrate over
    [0,1] with the state's interior nodes as quadrature panel breakpoints.
    When ``nonneg_condition`` is given (``"C7"`` for h-typed, ``"C8"`` for
    w-typed functionals) a negative result raises ModelViolationError.
    """
    quad = quad or QuadConfig()
    cache = getattr(u, "functional_cache", None)
    key = (render(fx), quad)
    if cache is not None and key in cache:
        value = cache[key]
    else:
        value = float(_eval_fn(fx, u, quad))
        if cache is not None:
            cache[key] = value
    if nonneg_condition is not None and value < 0.0:
        raise ModelViolationError(
            nonneg_condition,
            f"functional {render(fx)!r} evaluated to {value} < 0 on the cone")
    return value


def _eval_fn(fx, u, quad):
    if isinstance(fx, (Val, Der)):
        if fx.index > u.n:
            raise EvalDomainError(
                f"functional references component {fx.index} but the state "
                f"has {u.n}", render(fx))
        if isinstance(fx, Val):
            return u.value(fx.index - 1, fx.t0)
        return u.derivative(fx.index - 1, fx.t0)
    if isinstance(fx, Integral):
        body = fx.body

        def integrand(s):
            env = {"s": s}
            for k in range(u.n):
                env[f"u{k + 1}"] = u.value(k, s)
                env[f"du{k + 1}"] = u.derivative(k, s)
            return eval_scalar(body, env)

        return integrate(integrand, 0.0, 1.0, u.interior_nodes(), quad)
    if isinstance(fx, Num):
        return fx.value
    if isinstance(fx, Const):
        return _CONSTANTS[fx.name]
    if isinstance(fx, Unary):
        x = _eval_fn(fx.arg, u, quad)
        if fx.op == "neg":
            return -x
        if fx.op == "log" and x <= 0.0:
            raise EvalDomainError("log of a nonpositive value", render(fx))
        if fx.op == "sqrt" and x < 0.0:
            raise EvalDomainError("sqrt of a negative value", render(fx))
        fn = {"exp": math.exp, "log": math.log, "abs": abs, "sqrt": math.sqrt,
              "pos": lambda v: max(v, 0.0),
              "step": lambda v: 1.0 if v > 0.0 else 0.0}[fx.op]
        return fn(x)
    if isinstance(fx, Bin):
        a = _eval_fn(fx.left, u, quad)
        b = _eval_fn(fx.right, u, quad)
        if fx.op == "+":
            return a + b
        if fx.op == "-":
            return a - b
        if fx.op == "*":
            return a * b
        if fx.op == "/":
            if b == 0.0:
                raise EvalDomainError("division by zero", render(fx))
            return a / b
        r = math.pow(a, b) if (a >= 0 or float(b).is_integer()) else math.nan
        if not math.isfinite(r):
            raise EvalDomainError("non-finite result", render(fx))
        return r
    raise TypeError(f"not a functional expression: {fx!r}")


# ---------------------------------------------------------------------------
# Rendering and inspection

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def render(expr) -> str:
    """Render an AST back to DSL text; ``parse(render(x))`` is structurally
    identical to ``x`` for every grammar-valid input."""
    return _render(expr, 0)


def _render(expr, parent_prec: int) -> str:
    if isinstance(expr, Num):
        v = expr.value
        return repr(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
    if isinstance(expr, (Const, Var)):
        return expr.name
    if isinstance(expr, Unary):
        if expr.op == "neg":
            inner = _render(expr.arg, _PREC["neg"])
            text = f"-{inner}"
            return f"({text})" if parent_prec > _PREC["neg"] else text
        return f"{expr.op}({_render(expr.arg, 0)})"
    if isinstance(expr, Bin):
        prec = _PREC[expr.op]
        # left-assoc ops need parens on an equal-precedence right child;
        # '^' is right-assoc so the asymmetry flips
        if expr.op == "^":
            left = _render(expr.left, prec + 1)
            right = _render(expr.right, prec)
        else:
            left = _render(expr.left, prec)
            right = _render(expr.right, prec + 1)
        text = f"{left} {expr.op} {right}"
        return f"({text})" if parent_prec > prec else text
    if isinstance(expr, Val):
        return f"val({expr.index}, {repr(expr.t0)})"
    if isinstance(expr, Der):
        return f"der({expr.index}, {repr(expr.t0)})"
    if isinstance(expr, Integral):
        return f"int({_render(expr.body, 0)})"
    raise TypeError(f"not an expression: {expr!r}")


def variables_of(expr) -> frozenset:
    """Free variables of a scalar expression (int bodies are not descended)."""
    out = set()

    def walk(node):
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, Unary):
            walk(node.arg)
        elif isinstance(node, Bin):
            walk(node.left)
            walk(node.right)

    walk(expr)
    return frozenset(out)
