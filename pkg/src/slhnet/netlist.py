"""Line-oriented netlist language for SLH networks.

Example::

    # beamsplitter feeding one port of a cavity
    space c fock 10
    component M = beamsplitter(0.6, 0.8)
    component C = cavity(c, 0.5, 1.0)
    component N = passthrough(1)
    connect M -> C + N            # C and N are concatenated, then fed by M
    state coherent(c, 0.5, 0)
    run { dt=0.001 T=5 }

Statements end at a newline unless a bracket is still open.  Expressions
support complex literals (``2``, ``1.5e-3``, ``0.2i``), ``i``, ``pi``,
``+ - * /``, ``^`` (integer powers of operators), parentheses, postfix ``'``
(adjoint) and the builtins listed in :data:`FUNCTIONS`.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.linalg import expm

from . import holevo as _holevo
from .classical import Grid, GridEmbedding, embed_sde_grid
from .dynamics import basis_state, coherent_state, product_state
from .hilbert import (
    HilbertSpaceError,
    Operator,
    OperatorMatrix,
    Registry,
    SpaceFactor,
    annihilation,
    creation,
    identity,
    number,
    unify,
)
from .network import NetworkError, NetworkSpec
from .slh import SLH, SLHError, concatenate_all

MAX_SPACE_DIM = 2048
MAX_TOTAL_DIM = 4096
MAX_CHANNELS = 256


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    message: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.severity}: {self.message}"


class NetlistError(Exception):
    """Carries the diagnostics of a failed parse or command."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


class _Fail(Exception):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(message)
        self.message, self.line, self.column = message, line, column


# lexer --------------------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    kind: str  # NAME NUMBER IMAG OP NEWLINE EOF
    text: str
    line: int
    column: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)(?P<imag>[ij](?![A-Za-z0-9_]))?
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|[-+*/^()\[\]{},=':;])
""", re.VERBOSE)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    depth = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise _Fail(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind == "imag":
            kind = "number"
        if kind == "newline":
            if depth == 0:
                tokens.append(Token("NEWLINE", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind == "number":
            if m.group("imag"):
                tokens.append(Token("IMAG", m.group("number"), line, col))
            else:
                tokens.append(Token("NUMBER", m.group("number"), line, col))
        elif kind == "name":
            tokens.append(Token("NAME", m.group(), line, col))
        elif kind == "op":
            t = m.group()
            if t in "([{":
                depth += 1
            elif t in ")]}":
                depth = max(0, depth - 1)
            tokens.append(Token("OP", t, line, col))
        pos = m.end()
    tokens.append(Token("NEWLINE", "\n", line, pos - line_start + 1))
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


# expression AST ------------------------------------------------------------------

@dataclass(frozen=True)
class Node:
    kind: str  # num, var, call, neg, bin, adj
    value: Any
    args: tuple = ()
    line: int = 0
    column: int = 0


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def advance(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "EOF":
            self.i += 1
        return t

    def fail(self, msg: str, tok: Token | None = None):
        t = tok or self.tok
        raise _Fail(msg, t.line, t.column)

    def at_op(self, text: str) -> bool:
        return self.tok.kind == "OP" and self.tok.text == text

    def expect_op(self, text: str) -> Token:
        if not self.at_op(text):
            self.fail(f"expected {text!r}, found {self._describe(self.tok)}")
        return self.advance()

    def expect_name(self, what: str = "name") -> Token:
        if self.tok.kind != "NAME":
            self.fail(f"expected {what}, found {self._describe(self.tok)}")
        return self.advance()

    def expect_int(self, what: str) -> tuple[int, Token]:
        t = self.tok
        if t.kind != "NUMBER" or not t.text.isdigit():
            self.fail(f"expected integer {what}, found {self._describe(t)}")
        self.advance()
        return int(t.text), t

    @staticmethod
    def _describe(t: Token) -> str:
        if t.kind == "NEWLINE":
            return "end of line"
        if t.kind == "EOF":
            return "end of input"
        return repr(t.text)

    def _finite(self, t: Token) -> float:
        v = float(t.text)
        if not math.isfinite(v):
            self.fail(f"number {t.text} is out of range", t)
        return v

    def skip_newlines(self):
        while self.tok.kind == "NEWLINE":
            self.advance()

    def skip_statement(self):
        while self.tok.kind not in ("NEWLINE", "EOF"):
            self.advance()

    # expressions
    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "OP" and self.tok.text in "+-":
            op = self.advance()
            node = Node("bin", op.text, (node, self.term()), op.line, op.column)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.kind == "OP" and self.tok.text in "*/":
            op = self.advance()
            node = Node("bin", op.text, (node, self.unary()), op.line, op.column)
        return node

    def unary(self) -> Node:
        if self.tok.kind == "OP" and self.tok.text in "+-":
            op = self.advance()
            inner = self.unary()
            return inner if op.text == "+" else Node("neg", None, (inner,), op.line, op.column)
        return self.power()

    def power(self) -> Node:
        base = self.postfix()
        if self.at_op("^"):
            op = self.advance()
            return Node("bin", "^", (base, self.unary()), op.line, op.column)
        return base

    def postfix(self) -> Node:
        node = self.atom()
        while self.at_op("'"):
            op = self.advance()
            node = Node("adj", None, (node,), op.line, op.column)
        return node

    def atom(self) -> Node:
        t = self.tok
        if t.kind == "NUMBER":
            self.advance()
            return Node("num", complex(self._finite(t)), (), t.line, t.column)
        if t.kind == "IMAG":
            self.advance()
            return Node("num", complex(0.0, self._finite(t)), (), t.line, t.column)
        if t.kind == "NAME":
            self.advance()
            if self.at_op("("):
                self.advance()
                args = []
                if not self.at_op(")"):
                    args.append(self.expr())
                    while self.at_op(","):
                        self.advance()
                        args.append(self.expr())
                self.expect_op(")")
                return Node("call", t.text, tuple(args), t.line, t.column)
            return Node("var", t.text, (), t.line, t.column)
        if self.at_op("("):
            self.advance()
            node = self.expr()
            self.expect_op(")")
            return node
        self.fail(f"expected an expression, found {self._describe(t)}")


# evaluation -------------------------------------------------------------------------

Value = Any  # complex | Operator | np.ndarray (grid function)


def _is_scalar(v) -> bool:
    return isinstance(v, (complex, float, int))


def _binary(op: str, a: Value, b: Value, node: Node) -> Value:
    def bad():
        raise _Fail(f"cannot apply {op!r} to {_kind(a)} and {_kind(b)}", node.line, node.column)

    if op == "^":
        if not _is_scalar(b):
            bad()
        if _is_scalar(a) or isinstance(a, np.ndarray):
            return a ** b if not _is_scalar(a) else complex(a) ** complex(b)
        if isinstance(a, Operator):
            k = complex(b)
            if k.imag != 0 or k.real != int(k.real) or k.real < 0 or k.real > 10000:
                raise _Fail("operator powers must be non-negative integers", node.line, node.column)
            return a ** int(k.real)
        bad()
    if isinstance(a, Operator) and isinstance(b, np.ndarray) or isinstance(b, Operator) and isinstance(a, np.ndarray):
        bad()
    try:
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if isinstance(b, Operator):
                bad()
            if _is_scalar(b) and complex(b) == 0:
                raise _Fail("division by zero", node.line, node.column)
            return a / b
    except HilbertSpaceError as exc:
        raise _Fail(str(exc), node.line, node.column) from None
    bad()


def _kind(v) -> str:
    if isinstance(v, Operator):
        return "operator"
    if isinstance(v, np.ndarray):
        return "grid function"
    return "scalar"


@dataclass
class Context:
    registry: Registry
    grids: dict[str, np.ndarray] = field(default_factory=dict)
    variables: dict[str, Value] = field(default_factory=dict)

    def space(self, node: Node, arg: Node) -> SpaceFactor:
        if arg.kind != "var":
            raise _Fail("expected a space name", arg.line, arg.column)
        if arg.value not in self.registry:
            raise _Fail(f"undeclared space {arg.value!r}", arg.line, arg.column)
        return self.registry[arg.value]


def _scalar_arg(v, node: Node, real: bool = False) -> complex:
    if not _is_scalar(v):
        raise _Fail(f"expected a scalar, got {_kind(v)}", node.line, node.column)
    v = complex(v)
    if not (math.isfinite(v.real) and math.isfinite(v.imag)):
        raise _Fail("value is not finite", node.line, node.column)
    if real and v.imag != 0:
        raise _Fail("expected a real number", node.line, node.column)
    return v


def _fock_op(ctor):
    def fn(ctx: Context, node: Node):
        if len(node.args) != 1:
            raise _Fail(f"{node.value}() takes one space name", node.line, node.column)
        sp = ctx.space(node, node.args[0])
        try:
            return ctor(sp)
        except HilbertSpaceError as exc:
            raise _Fail(str(exc), node.line, node.column) from None
    return fn


def _fn_id(ctx: Context, node: Node):
    if len(node.args) != 1:
        raise _Fail("id() takes one space name", node.line, node.column)
    return identity(ctx.space(node, node.args[0]))


def _fn_q(ctx: Context, node: Node):
    if len(node.args) != 1:
        raise _Fail("q() takes one space name", node.line, node.column)
    sp = ctx.space(node, node.args[0])
    if sp.label not in ctx.grids:
        raise _Fail(f"space {sp.label!r} has no grid", node.line, node.column)
    return Operator(np.diag(ctx.grids[sp.label]).astype(complex), (sp,))


def _elementwise(name: str, real_fn: Callable, mat_fn: Callable | None = None):
    def fn(ctx: Context, node: Node):
        if len(node.args) != 1:
            raise _Fail(f"{name}() takes one argument", node.line, node.column)
        v = evaluate(node.args[0], ctx)
        if isinstance(v, Operator):
            if mat_fn is None:
                raise _Fail(f"{name}() is not defined for operators", node.line, node.column)
            return Operator(mat_fn(v.data), v.signature)
        if isinstance(v, np.ndarray):
            return real_fn(v)
        if name == "sqrt":
            v = _scalar_arg(v, node, real=True)
            if v.real < 0:
                raise _Fail("sqrt() of a negative number", node.line, node.column)
            return complex(math.sqrt(v.real))
        with np.errstate(all="ignore"):
            return complex(real_fn(np.complex128(v)))
    return fn


FUNCTIONS: dict[str, Callable[[Context, Node], Value]] = {
    "a": _fock_op(annihilation),
    "adag": _fock_op(creation),
    "n": _fock_op(number),
    "id": _fn_id,
    "q": _fn_q,
    "sqrt": _elementwise("sqrt", np.sqrt),
    "exp": _elementwise("exp", np.exp, expm),
    "sin": _elementwise("sin", np.sin),
    "cos": _elementwise("cos", np.cos),
    "tanh": _elementwise("tanh", np.tanh),
}


def evaluate(node: Node, ctx: Context) -> Value:
    k = node.kind
    if k == "num":
        return node.value
    if k == "var":
        name = node.value
        if name in ctx.variables:
            return ctx.variables[name]
        if name in ("i", "j"):
            return 1j
        if name == "pi":
            return complex(math.pi)
        raise _Fail(f"unknown name {name!r}", node.line, node.column)
    if k == "call":
        fn = FUNCTIONS.get(node.value)
        if fn is None:
            raise _Fail(f"unknown function {node.value!r}", node.line, node.column)
        return fn(ctx, node)
    if k == "neg":
        return -evaluate(node.args[0], ctx)
    if k == "adj":
        v = evaluate(node.args[0], ctx)
        if isinstance(v, Operator):
            return v.adjoint()
        if isinstance(v, np.ndarray):
            return np.conj(v)
        return complex(v).conjugate()
    if k == "bin":
        a = evaluate(node.args[0], ctx)
        b = evaluate(node.args[1], ctx)
        with np.errstate(all="ignore"):
            return _binary(node.value, a, b, node)
    raise _Fail(f"internal: unknown node {k}", node.line, node.column)


def _to_operator(v: Value, node: Node) -> Operator:
    if isinstance(v, Operator):
        if not np.all(np.isfinite(v.data)):
            raise _Fail("operator has non-finite entries", node.line, node.column)
        return v
    if _is_scalar(v):
        return Operator.scalar(_scalar_arg(v, node))
    raise _Fail(f"expected an operator or scalar, got {_kind(v)}", node.line, node.column)


# document ---------------------------------------------------------------------------

@dataclass
class ComponentDef:
    name: str
    triple: SLH
    kind: str
    line: int
    column: int
    embedding: GridEmbedding | None = None


@dataclass(frozen=True)
class ConnectionDef:
    """``src -> dst``; each end is one component or a ``+`` group of them."""

    src: tuple[str, ...]
    dst: tuple[str, ...]
    line: int
    column: int


@dataclass(frozen=True)
class CouplingDef:
    M: Operator
    N: Operator
    line: int
    column: int


@dataclass(frozen=True)
class StateItem:
    kind: str  # vacuum, fock, coherent, gaussian
    space: str | None
    params: tuple
    line: int
    column: int


@dataclass
class NetlistDocument:
    registry: Registry = field(default_factory=Registry)
    grids: dict[str, np.ndarray] = field(default_factory=dict)
    components: dict[str, ComponentDef] = field(default_factory=dict)
    connections: list[ConnectionDef] = field(default_factory=list)
    couplings: list[CouplingDef] = field(default_factory=list)
    state: list[StateItem] | None = None
    state_line: int = 0
    run: dict[str, float] = field(default_factory=dict)

    @property
    def spaces(self) -> list[SpaceFactor]:
        return list(self.registry)

    @property
    def signature(self) -> tuple[SpaceFactor, ...]:
        return unify(self.spaces)

    def context(self) -> Context:
        return Context(self.registry, self.grids)

    def groups(self) -> dict[str, tuple[str, ...]]:
        """Node name -> member components.

        Components joined with ``+`` in a connect statement act as their
        concatenation; every other component is its own node.  Nodes are
        ordered by their first member's declaration.
        """
        owner: dict[str, tuple[str, ...]] = {}
        for conn in self.connections:
            for end in (conn.src, conn.dst):
                for name in end:
                    if len(end) > 1 or name not in owner:
                        if name in owner and len(owner[name]) > 1 and owner[name] != end:
                            raise NetlistError([Diagnostic(
                                "error", f"component {name!r} belongs to two different groups",
                                conn.line, conn.column)])
                        owner[name] = end
        nodes: dict[str, tuple[str, ...]] = {}
        for name in self.components:
            members = owner.get(name, (name,))
            nodes.setdefault("+".join(members), members)
        return nodes

    def network(self, diagnostics: list[Diagnostic] | None = None) -> NetworkSpec:
        """Build the network; connection errors are collected into
        ``diagnostics`` when given, otherwise raised as :class:`NetlistError`."""
        spec = NetworkSpec()
        for node, members in self.groups().items():
            parts = [self.components[m].triple for m in members]
            spec.add_component(node, parts[0] if len(parts) == 1 else concatenate_all(parts))
        errors = []
        for conn in self.connections:
            try:
                spec.add_connection("+".join(conn.src), "+".join(conn.dst))
            except NetworkError as exc:
                errors.append(Diagnostic("error", str(exc), conn.line, conn.column))
        if diagnostics is not None:
            diagnostics.extend(errors)
        elif errors:
            raise NetlistError(errors)
        for cp in self.couplings:
            spec.add_direct_coupling(cp.M, cp.N)
        return spec

    def expression(self, text: str) -> Operator:
        """Evaluate a standalone expression (e.g. an observable) in this document."""
        try:
            toks = tokenize(text)
            p = _Parser(toks)
            node = p.expr()
            p.skip_newlines()
            if p.tok.kind != "EOF":
                p.fail(f"unexpected {p._describe(p.tok)} after expression")
            return _to_operator(evaluate(node, self.context()), node)
        except _Fail as exc:
            raise NetlistError([Diagnostic("error", exc.message, exc.line, exc.column)]) from None
        except (RecursionError, MemoryError, OverflowError, ValueError, ArithmeticError) as exc:
            raise NetlistError([Diagnostic("error", f"cannot evaluate expression: {exc}", 1, 1)]) from None

    def initial_state(self, signature=None) -> np.ndarray:
        """Density operator on ``signature`` (default: all declared spaces)."""
        if self.state is None:
            raise NetlistError([Diagnostic("error", "no state declaration", 1, 1)])
        sig = unify(self.signature if signature is None else signature)
        vectors: dict[str, np.ndarray] = {}
        for item in self.state:
            if item.kind == "vacuum":
                continue
            sp = self.registry[item.space]
            if item.kind == "fock":
                vectors[sp.label] = basis_state(sp, int(item.params[0]))
            elif item.kind == "coherent":
                vectors[sp.label] = coherent_state(sp, complex(item.params[0], item.params[1]))
            elif item.kind == "gaussian":
                x = self.grids[sp.label]
                mean, std = item.params
                v = np.exp(-((x - mean) ** 2) / (4 * std**2)).astype(complex)
                vectors[sp.label] = v / np.linalg.norm(v)
        return product_state(sig, vectors)


# statement parsing ------------------------------------------------------------------

def _check_total_dim(reg: Registry, tok: Token):
    total = 1
    for f in reg:
        total *= f.dim
    if total > MAX_TOTAL_DIM:
        raise _Fail(f"total Hilbert-space dimension {total} exceeds {MAX_TOTAL_DIM}", tok.line, tok.column)


def _stmt_space(p: _Parser, doc: NetlistDocument):
    name = p.expect_name("space name")
    kind_tok = p.expect_name("'fock' or 'dim'")
    if kind_tok.text not in ("fock", "dim"):
        p.fail("expected 'fock' or 'dim'", kind_tok)
    dim, dtok = p.expect_int("dimension")
    if dim < 1 or dim > MAX_SPACE_DIM:
        p.fail(f"dimension must be between 1 and {MAX_SPACE_DIM}", dtok)
    if name.text in doc.registry:
        p.fail(f"space {name.text!r} already declared", name)
    doc.registry.register(name.text, "fock" if kind_tok.text == "fock" else "generic", dim)
    _check_total_dim(doc.registry, dtok)


def _matrix_literal(p: _Parser, ctx: Context) -> list[list[Operator]]:
    p.expect_op("[")
    rows = []
    if not p.at_op("]"):
        rows.append(_vector_literal(p, ctx))
        while p.at_op(","):
            p.advance()
            rows.append(_vector_literal(p, ctx))
    p.expect_op("]")
    return rows


def _vector_literal(p: _Parser, ctx: Context) -> list[Operator]:
    p.expect_op("[")
    out = []
    if not p.at_op("]"):
        node = p.expr()
        out.append(_to_operator(evaluate(node, ctx), node))
        while p.at_op(","):
            p.advance()
            node = p.expr()
            out.append(_to_operator(evaluate(node, ctx), node))
    p.expect_op("]")
    return out


def _literal_component(p: _Parser, doc: NetlistDocument, name: Token) -> ComponentDef:
    open_tok = p.expect_op("{")
    ctx = doc.context()
    fields: dict[str, Any] = {}
    while not p.at_op("}"):
        if p.tok.kind in ("EOF", "NEWLINE"):
            p.fail("unterminated component block", open_tok)
        if p.at_op(",") or p.at_op(";"):
            p.advance()
            continue
        key = p.expect_name("'S', 'L' or 'H'")
        if key.text not in ("S", "L", "H"):
            p.fail(f"unknown field {key.text!r}; expected S, L or H", key)
        if key.text in fields:
            p.fail(f"field {key.text} given twice", key)
        p.expect_op("=")
        if key.text == "S":
            fields["S"] = (_matrix_literal(p, ctx), key)
        elif key.text == "L":
            fields["L"] = (_vector_literal(p, ctx), key)
        else:
            node = p.expr()
            fields["H"] = (_to_operator(evaluate(node, ctx), node), key)
    p.advance()
    if "S" in fields:
        S, stok = fields["S"]
        n = len(S)
        if any(len(r) != n for r in S):
            p.fail("S must be a square matrix", stok)
    else:
        S, n = None, len(fields["L"][0]) if "L" in fields else 0
    if "L" in fields:
        L, ltok = fields["L"]
        if len(L) != n:
            p.fail(f"L has {len(L)} entries but S is {n}x{n}", ltok)
    else:
        L = [0.0] * n
    if n > MAX_CHANNELS:
        p.fail(f"too many channels ({n})", name)
    if S is None:
        S = np.eye(n).tolist()
    H = fields["H"][0] if "H" in fields else 0.0
    Sm = OperatorMatrix.from_entries(S) if n else OperatorMatrix.zeros(0, 0)
    Lm = OperatorMatrix.column(L) if n else OperatorMatrix.zeros(0, 1)
    triple = SLH(Sm, Lm, H, validate=False)
    return ComponentDef(name.text, triple, "literal", name.line, name.column)


def _args(node: Node, count: int, fname: str):
    if len(node.args) != count:
        raise _Fail(f"{fname}() takes {count} arguments, got {len(node.args)}", node.line, node.column)
    return node.args


def _builtin_component(p: _Parser, doc: NetlistDocument, name: Token) -> ComponentDef:
    call = p.atom()
    if call.kind != "call":
        raise _Fail("expected a builtin component such as cavity(...)", call.line, call.column)
    ctx = doc.context()
    fname = call.value
    emb = None
    if fname == "cavity":
        sp_node, g_node, d_node = _args(call, 3, fname)
        sp = ctx.space(call, sp_node)
        if sp.kind != "fock":
            raise _Fail(f"cavity needs a Fock space, {sp.label!r} is generic", sp_node.line, sp_node.column)
        gamma = _scalar_arg(evaluate(g_node, ctx), g_node, real=True).real
        delta = _scalar_arg(evaluate(d_node, ctx), d_node, real=True).real
        if gamma < 0:
            raise _Fail("damping rate must be non-negative", g_node.line, g_node.column)
        a = annihilation(sp)
        triple = SLH([[1.0]], [math.sqrt(gamma) * a], delta * number(sp), validate=False)
    elif fname == "beamsplitter":
        a_node, b_node = _args(call, 2, fname)
        alpha = _scalar_arg(evaluate(a_node, ctx), a_node)
        beta = _scalar_arg(evaluate(b_node, ctx), b_node)
        triple = SLH([[beta, -alpha], [alpha, beta]], [0.0, 0.0], 0.0, validate=False)
    elif fname == "passthrough":
        (k_node,) = _args(call, 1, fname)
        k = _scalar_arg(evaluate(k_node, ctx), k_node, real=True).real
        if k != int(k) or k < 0 or k > MAX_CHANNELS:
            raise _Fail(f"passthrough() needs an integer channel count in 0..{MAX_CHANNELS}",
                        k_node.line, k_node.column)
        triple = SLH.identity(int(k))
    elif fname == "holevo":
        ops = [_to_operator(evaluate(a, ctx), a) for a in _args(call, 4, fname)]
        try:
            triple = _holevo.holevo_to_slh(_holevo.HolevoGenerator(*ops))
        except SLHError as exc:
            raise _Fail(str(exc), call.line, call.column) from None
    elif fname in ("photon_feedback", "quadrature_feedback"):
        (f_node,) = _args(call, 1, fname)
        F = _to_operator(evaluate(f_node, ctx), f_node)
        try:
            triple = getattr(_holevo, fname)(F)
        except SLHError as exc:
            raise _Fail(str(exc), f_node.line, f_node.column) from None
    elif fname == "classical_sde":
        grid_node, f_node, g_node, h_node = _args(call, 4, fname)
        if grid_node.kind != "call" or grid_node.value != "grid":
            raise _Fail("first argument must be grid(xmin, xmax, points)", grid_node.line, grid_node.column)
        lo, hi, pts = (_scalar_arg(evaluate(a, ctx), a, real=True).real for a in _args(grid_node, 3, "grid"))
        if pts != int(pts) or not 3 <= pts <= MAX_SPACE_DIM or not hi > lo:
            raise _Fail(f"grid needs xmax > xmin and 3..{MAX_SPACE_DIM} points", grid_node.line, grid_node.column)
        grid = Grid(lo, hi, int(pts))
        x = grid.x
        gctx = Context(ctx.registry, ctx.grids, {"x": x})

        def sample(node):
            v = evaluate(node, gctx)
            if _is_scalar(v):
                if complex(v).imag:
                    raise _Fail("grid functions must be real", node.line, node.column)
                return np.full_like(x, complex(v).real)
            if isinstance(v, np.ndarray):
                if np.iscomplexobj(v) and np.abs(v.imag).max() > 0:
                    raise _Fail("grid functions must be real", node.line, node.column)
                return np.real(v).astype(float)
            raise _Fail("grid functions cannot contain operators", node.line, node.column)

        fv, gv, hv = sample(f_node), sample(g_node), sample(h_node)
        if not all(np.all(np.isfinite(v)) for v in (fv, gv, hv)):
            raise _Fail("grid functions must be finite", call.line, call.column)
        if name.text in doc.registry:
            raise _Fail(f"space {name.text!r} already declared", name.line, name.column)
        emb = embed_sde_grid(grid, fv, gv, hv, label=name.text, registry=doc.registry)
        doc.grids[name.text] = x
        _check_total_dim(doc.registry, name)
        triple = emb.triple
    else:
        raise _Fail(f"unknown component builtin {fname!r}", call.line, call.column)
    return ComponentDef(name.text, triple, fname, name.line, name.column, emb)


def _stmt_component(p: _Parser, doc: NetlistDocument):
    name = p.expect_name("component name")
    if name.text in doc.components:
        p.fail(f"component {name.text!r} already defined", name)
    if p.at_op("{"):
        comp = _literal_component(p, doc, name)
    elif p.at_op("="):
        p.advance()
        comp = _builtin_component(p, doc, name)
    else:
        p.fail("expected '{' or '=' after component name")
    doc.components[name.text] = comp


def _connect_end(p: _Parser, doc: NetlistDocument, what: str) -> tuple[str, ...]:
    names = [p.expect_name(what)]
    while p.at_op("+"):
        p.advance()
        names.append(p.expect_name(what))
    seen = set()
    for t in names:
        if t.text not in doc.components:
            p.fail(f"undeclared component {t.text!r}", t)
        if t.text in seen:
            p.fail(f"component {t.text!r} repeated in a group", t)
        seen.add(t.text)
    return tuple(t.text for t in names)


def _stmt_connect(p: _Parser, doc: NetlistDocument, kw: Token):
    src = _connect_end(p, doc, "source component")
    p.expect_op("->")
    dst = _connect_end(p, doc, "target component")
    conn = ConnectionDef(src, dst, kw.line, kw.column)
    doc.connections.append(conn)
    try:
        doc.groups()
    except NetlistError:
        doc.connections.pop()
        raise _Fail("a component may belong to only one '+' group", kw.line, kw.column) from None


def _stmt_couple(p: _Parser, doc: NetlistDocument, kw: Token):
    ctx = doc.context()
    vals = {}
    for want in ("M", "N"):
        key = p.expect_name(f"'{want}'")
        if key.text != want:
            p.fail(f"expected '{want}='", key)
        p.expect_op("=")
        node = p.expr()
        vals[want] = _to_operator(evaluate(node, ctx), node)
    doc.couplings.append(CouplingDef(vals["M"], vals["N"], kw.line, kw.column))


def _stmt_state(p: _Parser, doc: NetlistDocument, kw: Token):
    if doc.state is not None:
        p.fail(f"second state declaration (first on line {doc.state_line})", kw)
    ctx = doc.context()
    items = []
    while p.tok.kind not in ("NEWLINE", "EOF"):
        if p.at_op(","):
            p.advance()
            continue
        node = p.atom()
        if node.kind == "var" and node.value == "vacuum":
            items.append(StateItem("vacuum", None, (), node.line, node.column))
            continue
        if node.kind != "call" or node.value not in ("fock", "coherent", "gaussian"):
            raise _Fail("expected vacuum, fock(...), coherent(...) or gaussian(...)", node.line, node.column)
        kind = node.value
        nargs = {"fock": 2, "coherent": 3, "gaussian": 3}[kind]
        args = _args(node, nargs, kind)
        sp = ctx.space(node, args[0])
        params = tuple(_scalar_arg(evaluate(a, ctx), a, real=True).real for a in args[1:])
        if kind == "fock":
            if params[0] != int(params[0]) or not 0 <= params[0] < sp.dim:
                raise _Fail(f"fock level must be an integer in 0..{sp.dim - 1}", node.line, node.column)
        elif kind == "coherent" and sp.kind != "fock":
            raise _Fail("coherent states need a Fock space", node.line, node.column)
        elif kind == "gaussian":
            if sp.label not in doc.grids:
                raise _Fail("gaussian states need a classical_sde grid space", node.line, node.column)
            if params[1] <= 0:
                raise _Fail("gaussian width must be positive", node.line, node.column)
        items.append(StateItem(kind, sp.label, params, node.line, node.column))
    if not items:
        p.fail("empty state declaration", kw)
    doc.state = items
    doc.state_line = kw.line


RUN_KEYS = {"dt", "T", "channel", "seed", "runs", "tol"}


def _stmt_run(p: _Parser, doc: NetlistDocument):
    open_tok = p.expect_op("{")
    while not p.at_op("}"):
        if p.tok.kind in ("EOF", "NEWLINE"):
            p.fail("unterminated run block", open_tok)
        if p.at_op(",") or p.at_op(";"):
            p.advance()
            continue
        key = p.expect_name("run parameter")
        if key.text not in RUN_KEYS:
            p.fail(f"unknown run parameter {key.text!r}; expected one of {sorted(RUN_KEYS)}", key)
        p.expect_op("=")
        node = p.expr()
        v = _scalar_arg(evaluate(node, doc.context()), node, real=True).real
        if not math.isfinite(v):
            raise _Fail(f"{key.text} must be finite", node.line, node.column)
        doc.run[key.text] = v
    p.advance()


def _statement(p: _Parser, doc: NetlistDocument, kw: Token):
    if kw.kind != "NAME":
        p.fail(f"expected a statement keyword, found {p._describe(kw)}")
    p.advance()
    if kw.text == "space":
        _stmt_space(p, doc)
    elif kw.text == "component":
        _stmt_component(p, doc)
    elif kw.text == "connect":
        _stmt_connect(p, doc, kw)
    elif kw.text == "couple":
        _stmt_couple(p, doc, kw)
    elif kw.text == "state":
        _stmt_state(p, doc, kw)
    elif kw.text == "run":
        _stmt_run(p, doc)
    else:
        p.fail(f"unknown statement {kw.text!r}", kw)
    if p.tok.kind not in ("NEWLINE", "EOF"):
        p.fail(f"unexpected {p._describe(p.tok)} at end of statement")


def parse_netlist(text: str | bytes) -> NetlistDocument:
    """Parse and evaluate a netlist (``bytes`` are decoded as UTF-8).

    Raises :class:`NetlistError` with positioned diagnostics; no other
    exception escapes for any input.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            line = bytes(text)[:exc.start].count(b"\n") + 1
            raise NetlistError([Diagnostic("error", "input is not valid UTF-8", line, 1)]) from None
    doc = NetlistDocument()
    diags: list[Diagnostic] = []
    try:
        toks = tokenize(text)
    except _Fail as exc:
        raise NetlistError([Diagnostic("error", exc.message, exc.line, exc.column)]) from None
    p = _Parser(toks)
    while True:
        p.skip_newlines()
        if p.tok.kind == "EOF":
            break
        kw = p.tok
        try:
            with np.errstate(all="ignore"):
                _statement(p, doc, kw)
        except _Fail as exc:
            diags.append(Diagnostic("error", exc.message, exc.line, exc.column))
            p.skip_statement()
        except (HilbertSpaceError, SLHError, NetworkError, ValueError, ArithmeticError,
                RecursionError, MemoryError, IndexError, TypeError, np.linalg.LinAlgError) as exc:
            diags.append(Diagnostic("error", f"{type(exc).__name__}: {exc}", kw.line, kw.column))
            p.skip_statement()
    if diags:
        raise NetlistError(diags)
    return doc


def validate_document(doc: NetlistDocument, tol: float = 1e-10) -> tuple[list[Diagnostic], list[dict]]:
    """Network rules and per-component invariants.

    Returns error/warning diagnostics and a per-component report.  Grid
    embeddings are not exactly Hermitian at their end points; that is a
    warning, not an error.
    """
    diags: list[Diagnostic] = []
    report = []
    for c in doc.components.values():
        u = c.triple.unitarity_error()
        h = c.triple.hermiticity_error()
        report.append({"component": c.name, "channels": c.triple.n,
                       "unitarity_error": u, "hermiticity_error": h})
        if u > tol:
            diags.append(Diagnostic("error", f"component {c.name!r}: S is not unitary (error {u:.3e})",
                                    c.line, c.column))
        if h > tol:
            sev = "warning" if c.kind == "classical_sde" else "error"
            diags.append(Diagnostic(sev, f"component {c.name!r}: H is not self-adjoint (error {h:.3e})"
                                    + (" at grid boundary rows" if sev == "warning" else ""),
                                    c.line, c.column))
    try:
        doc.network(diags)
    except NetlistError as exc:
        diags.extend(exc.diagnostics)
    return diags, report
