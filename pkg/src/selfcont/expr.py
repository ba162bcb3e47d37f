"""Scalar expression language used by field, germ and path definitions.

Expressions are parsed into a small immutable AST, printed back in canonical
form, and compiled into vectorized numpy callables.  Evaluation is plain
IEEE double arithmetic; the tree is never simplified, so a parse/print/parse
round trip evaluates bit-identically.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

__all__ = [
    "Num", "Var", "Neg", "BinOp", "Call", "Compare",
    "FieldParseError", "FieldSyntaxError", "ArityError", "UnknownIdentifierError",
    "Tokenizer", "ExprParser", "parse_expr", "parse_predicate", "to_source",
    "compile_exprs", "variables_of",
]


# --------------------------------------------------------------------------
# errors

class FieldParseError(ValueError):
    """Base class for problems found while reading a definition."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class FieldSyntaxError(FieldParseError):
    pass


class ArityError(FieldParseError):
    pass


class UnknownIdentifierError(FieldParseError):
    pass


# --------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


@dataclass(frozen=True)
class Compare:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Call, Compare]

# name -> (min args, max args); None means unbounded
FUNCTIONS = {
    "abs": (1, 1),
    "sign": (1, 1),
    "sqrt": (1, 1),
    "sin": (1, 1),
    "cos": (1, 1),
    "min": (1, None),
    "max": (1, None),
    "norm": (1, None),
    "if": (3, 3),
    "pow": (2, 2),
}
RELOPS = ("<=", ">=", "==", "!=", "<", ">")


# --------------------------------------------------------------------------
# tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>=>|<=|>=|==|!=|[-+*/(),;<>=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # number, name, op, end
    text: str
    line: int
    column: int


class Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.tokens = list(self._scan(text))
        self.pos = 0

    @staticmethod
    def _scan(text):
        line, col, i = 1, 1, 0
        while i < len(text):
            m = _TOKEN_RE.match(text, i)
            if m is None:
                raise FieldSyntaxError(f"unexpected character {text[i]!r}", line, col)
            kind = m.lastgroup
            chunk = m.group()
            if kind != "ws":
                yield Token(kind, chunk, line, col)
            for ch in chunk:
                if ch == "\n":
                    line, col = line + 1, 1
                else:
                    col += 1
            i = m.end()
        yield Token("end", "", line, col)

    def peek(self, offset=0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        self.pos = min(self.pos + 1, len(self.tokens) - 1)
        return tok

    def at(self, text) -> bool:
        tok = self.peek()
        return tok.kind in ("op", "name") and tok.text == text

    def expect(self, text) -> Token:
        tok = self.peek()
        if not self.at(text):
            found = tok.text or "end of input"
            raise FieldSyntaxError(f"expected {text!r}, found {found!r}", tok.line, tok.column)
        return self.next()

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return FieldSyntaxError(message, tok.line, tok.column)


# --------------------------------------------------------------------------
# parser

_VAR_RE = re.compile(r"x([1-9]\d*)$")


class ExprParser:
    """Recursive-descent parser for the expression grammar.

    ``dim`` bounds the admissible ``x<i>`` indices; ``extra_vars`` lists the
    other identifiers allowed as variables (``eps`` for germ curves, ``t`` and
    ``j`` for path families).
    """

    def __init__(self, tokens: Tokenizer, dim: int | None, extra_vars: Sequence[str] = ()):
        self.tk = tokens
        self.dim = dim
        self.extra_vars = tuple(extra_vars)

    def expr(self) -> Expr:
        node = self.term()
        while self.tk.at("+") or self.tk.at("-"):
            op = self.tk.next()
            node = BinOp(op.text, node, self._operand(op, self.term))
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.tk.at("*") or self.tk.at("/"):
            op = self.tk.next()
            node = BinOp(op.text, node, self._operand(op, self.unary))
        return node

    def _operand(self, op_tok, rule):
        tok = self.tk.peek()
        if tok.kind == "end" or (tok.kind == "op" and tok.text in (")", ",", ";", "=>") + RELOPS):
            raise FieldSyntaxError(f"dangling {op_tok.text!r}: missing operand",
                                   op_tok.line, op_tok.column)
        return rule()

    def unary(self) -> Expr:
        if self.tk.at("-"):
            op = self.tk.next()
            return Neg(self._operand(op, self.unary))
        return self.atom()

    def atom(self) -> Expr:
        tok = self.tk.peek()
        if tok.kind == "number":
            self.tk.next()
            return Num(float(tok.text))
        if tok.kind == "name":
            self.tk.next()
            if self.tk.at("("):
                return self._call(tok)
            return self._variable(tok)
        if self.tk.at("("):
            self.tk.next()
            node = self.expr()
            self.tk.expect(")")
            return node
        found = tok.text or "end of input"
        raise self.tk.error(f"unexpected {found!r}, expected an expression", tok)

    def _variable(self, tok) -> Var:
        name = tok.text
        if name in self.extra_vars:
            return Var(name)
        m = _VAR_RE.match(name)
        if m and (self.dim is None or int(m.group(1)) <= self.dim):
            return Var(name)
        raise UnknownIdentifierError(f"unknown identifier {name!r}", tok.line, tok.column)

    def _call(self, tok) -> Call:
        name = tok.text
        if name not in FUNCTIONS:
            raise UnknownIdentifierError(f"unknown function {name!r}", tok.line, tok.column)
        self.tk.expect("(")
        if name == "if":
            args = [self.predicate()]
        else:
            args = [self.expr()]
        while self.tk.at(","):
            self.tk.next()
            args.append(self.expr())
        self.tk.expect(")")
        lo, hi = FUNCTIONS[name]
        if len(args) < lo or (hi is not None and len(args) > hi):
            want = str(lo) if lo == hi else f"at least {lo}"
            raise ArityError(f"{name}() takes {want} argument(s), got {len(args)}",
                             tok.line, tok.column)
        return Call(name, tuple(args))

    def predicate(self) -> Compare:
        left = self.expr()
        tok = self.tk.peek()
        if not (tok.kind == "op" and tok.text in RELOPS):
            found = tok.text or "end of input"
            raise self.tk.error(f"expected a comparison operator, found {found!r}", tok)
        self.tk.next()
        right = self._operand(tok, self.expr)
        return Compare(tok.text, left, right)

    def vector(self) -> tuple:
        self.tk.expect("(")
        items = [self.expr()]
        while self.tk.at(","):
            self.tk.next()
            items.append(self.expr())
        self.tk.expect(")")
        return tuple(items)


def _parse_whole(text, dim, extra_vars, rule):
    tk = Tokenizer(text)
    node = getattr(ExprParser(tk, dim, extra_vars), rule)()
    if tk.peek().kind != "end":
        raise tk.error(f"unexpected trailing {tk.peek().text!r}")
    return node


def parse_expr(text: str, dim: int | None = None, extra_vars: Sequence[str] = ()) -> Expr:
    """Parse a single scalar expression."""
    return _parse_whole(text, dim, extra_vars, "expr")


def parse_predicate(text: str, dim: int | None = None, extra_vars: Sequence[str] = ()) -> Compare:
    return _parse_whole(text, dim, extra_vars, "predicate")


# --------------------------------------------------------------------------
# canonical printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _fmt_number(value: float) -> str:
    if value != value or value in (float("inf"), float("-inf")):
        raise ValueError(f"non-finite literal {value!r} cannot be serialized")
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value)) if value != 0 or str(value)[0] != "-" else "-0"
    return repr(value)


def _prec(node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg) or (isinstance(node, Num) and (node.value < 0 or str(node.value)[0] == "-")):
        return 3
    return 4


def to_source(node: Expr) -> str:
    """Canonical text of an expression: single spaces, structural parentheses only."""
    if isinstance(node, Num):
        return _fmt_number(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        inner = to_source(node.operand)
        return "-" + (inner if _prec(node.operand) >= 3 else f"({inner})")
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        left = to_source(node.left)
        if _prec(node.left) < p:
            left = f"({left})"
        right = to_source(node.right)
        # same-level right operands keep their parentheses: float ops do not reassociate
        if _prec(node.right) <= p:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    if isinstance(node, Call):
        return f"{node.func}(" + ", ".join(to_source(a) for a in node.args) + ")"
    if isinstance(node, Compare):
        return f"{to_source(node.left)} {node.op} {to_source(node.right)}"
    raise TypeError(f"not an expression node: {node!r}")


# --------------------------------------------------------------------------
# compilation to numpy

def _py(node: Expr) -> str:
    if isinstance(node, Num):
        return f"_f64({node.value!r})"
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_py(node.operand)})"
    if isinstance(node, BinOp):
        return f"({_py(node.left)} {node.op} {_py(node.right)})"
    if isinstance(node, Compare):
        return f"({_py(node.left)} {node.op} {_py(node.right)})"
    if isinstance(node, Call):
        args = [_py(a) for a in node.args]
        f = node.func
        if f in ("abs", "sign", "sqrt", "sin", "cos"):
            return f"_np.{'absolute' if f == 'abs' else f}({args[0]})"
        if f == "pow":
            return f"_np.power({args[0]}, {args[1]})"
        if f in ("min", "max"):
            fn = "_np.minimum" if f == "min" else "_np.maximum"
            out = args[0]
            for a in args[1:]:
                out = f"{fn}({out}, {a})"
            return out
        if f == "norm":
            return "_np.sqrt(" + " + ".join(f"{a} * {a}" for a in args) + ")"
        if f == "if":
            return f"_np.where({args[0]}, {args[1]}, {args[2]})"
    raise TypeError(f"not an expression node: {node!r}")


def compile_exprs(exprs: Sequence[Expr], arg_names: Sequence[str]) -> Callable:
    """Compile expressions into ``fn(*arrays) -> tuple of arrays (or scalars)``.

    The generated source only contains names and literals taken from a parsed
    tree, so ``exec`` cannot be reached by arbitrary text.
    """
    for name in arg_names:
        if not name.isidentifier():
            raise ValueError(f"bad argument name {name!r}")
    body = ", ".join(_py(e) for e in exprs)
    src = f"def _fn({', '.join(arg_names)}):\n    return ({body},)\n"
    ns = {"_np": np, "_f64": np.float64}
    exec(compile(src, "<selfcont-expr>", "exec"), ns)
    return ns["_fn"]


def variables_of(node: Expr) -> set:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return variables_of(node.operand)
    if isinstance(node, (BinOp, Compare)):
        return variables_of(node.left) | variables_of(node.right)
    if isinstance(node, Call):
        out = set()
        for a in node.args:
            out |= variables_of(a)
        return out
    raise TypeError(node)
