"""Vector fields with explicit values on their discontinuity manifolds."""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from .expr import (
    ArityError, Call, Compare, ExprParser, FieldParseError, FieldSyntaxError, Num, Tokenizer,
    compile_exprs, parse_expr, parse_predicate, to_source,
)

__all__ = [
    "FieldEvaluationError", "PointOutsideDomain", "PointUndefined",
    "DomainSpec", "GrowthBound", "Override", "VectorFieldDef", "GermCurveDef",
    "parse_field_expr", "serialize_field", "evaluate", "check_growth_sample",
    "GrowthReport", "parse_germ", "parse_gradient", "parse_vector_exprs",
]


class FieldEvaluationError(ValueError):
    """Raised when a field cannot be evaluated at a point."""

    def __init__(self, message, point=None):
        self.point = None if point is None else np.asarray(point, dtype=float)
        if point is not None:
            message = f"{message} at x = {np.array2string(self.point, precision=17)}"
        super().__init__(message)


class PointOutsideDomain(FieldEvaluationError):
    pass


class PointUndefined(FieldEvaluationError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    """Open domain: all of space, an open box or an open ball, minus an excluded set."""

    kind: str = "all"
    lo: tuple | None = None
    hi: tuple | None = None
    center: tuple | None = None
    radius: float | None = None
    excluded: Compare | None = None

    def __post_init__(self):
        if self.kind == "box":
            lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
            if lo.shape != hi.shape or not np.all(lo < hi):
                raise ValueError("box domain needs lo < hi componentwise")
        elif self.kind == "ball":
            if self.radius is None or not self.radius > 0:
                raise ValueError("ball domain needs a positive radius")
        elif self.kind != "all":
            raise ValueError(f"unknown domain kind {self.kind!r}")

    @classmethod
    def box(cls, lo, hi, excluded=None):
        return cls("box", lo=tuple(map(float, lo)), hi=tuple(map(float, hi)), excluded=excluded)

    @classmethod
    def ball(cls, center, radius, excluded=None):
        return cls("ball", center=tuple(map(float, center)), radius=float(radius), excluded=excluded)

    def contains(self, X: np.ndarray) -> np.ndarray:
        """Membership mask for the rows of ``X`` (ignores the excluded set)."""
        if self.kind == "all":
            return np.ones(len(X), dtype=bool)
        if self.kind == "box":
            return np.all((X > np.asarray(self.lo)) & (X < np.asarray(self.hi)), axis=1)
        d = X - np.asarray(self.center)
        return np.sqrt(np.sum(d * d, axis=1)) < self.radius


@dataclass(frozen=True)
class GrowthBound:
    """Linear growth constants: |f(z)| <= c1 |z| + c0."""

    c1: float
    c0: float

    def __post_init__(self):
        if not self.c1 >= 0:
            raise ValueError("c1 must be nonnegative")
        if not self.c0 > 0:
            raise ValueError("c0 must be strictly positive")

    def __call__(self, radius):
        return self.c1 * radius + self.c0


@dataclass(frozen=True)
class Override:
    predicate: Compare
    values: tuple


def _arg_names(dim):
    return [f"x{i + 1}" for i in range(dim)]


@dataclass(frozen=True)
class VectorFieldDef:
    """A Borel field given by expressions, with ordered manifold overrides.

    Overrides are tested in order and the first predicate that holds supplies
    the value; elsewhere the default components apply.  Points in the
    excluded set with no override, and points where the selected branch
    produces a non-finite number, are undefined.
    """

    dim: int
    components: tuple
    overrides: tuple = ()
    domain: DomainSpec = dc_field(default_factory=DomainSpec)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be at least 1")
        if len(self.components) != self.dim:
            raise ArityError(f"expected {self.dim} components, got {len(self.components)}")
        for ov in self.overrides:
            if len(ov.values) != self.dim:
                raise ArityError(f"override expects {self.dim} components, got {len(ov.values)}")

    # compiled callables are cached on the instance; the dataclass is frozen
    @cached_property
    def _compiled(self):
        names = _arg_names(self.dim)
        default = compile_exprs(self.components, names)
        preds = [compile_exprs([ov.predicate], names) for ov in self.overrides]
        branches = [compile_exprs(ov.values, names) for ov in self.overrides]
        excluded = (compile_exprs([self.domain.excluded], names)
                    if self.domain.excluded is not None else None)
        return default, preds, branches, excluded

    def evaluate_many(self, X, strict: bool = True):
        """Evaluate at the rows of ``X``.

        With ``strict`` a :class:`FieldEvaluationError` names the first bad
        point; otherwise returns ``(values, ok)`` with NaN rows where the
        field is undefined or the point lies outside the domain.
        """
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"expected points of shape (M, {self.dim}), got {X.shape}")
        m = len(X)
        default, preds, branches, excluded = self._compiled
        cols = [X[:, i] for i in range(self.dim)]
        out = np.empty((m, self.dim))
        taken = np.zeros(m, dtype=bool)
        with np.errstate(all="ignore"):
            for pred, branch in zip(preds, branches):
                mask = np.broadcast_to(pred(*cols)[0], (m,)) & ~taken
                if mask.any():
                    sub = [c[mask] for c in cols]
                    vals = branch(*sub)
                    for i, v in enumerate(vals):
                        out[mask, i] = v
                    taken |= mask
            rest = ~taken
            if excluded is not None:
                undefined = np.broadcast_to(excluded(*cols)[0], (m,)) & rest
                rest &= ~undefined
            else:
                undefined = np.zeros(m, dtype=bool)
            if rest.all():
                vals = default(*cols)
                for i, v in enumerate(vals):
                    out[:, i] = v
            elif rest.any():
                sub = [c[rest] for c in cols]
                vals = default(*sub)
                for i, v in enumerate(vals):
                    out[rest, i] = v
        out[undefined] = np.nan
        inside = self.domain.contains(X)
        ok = inside & ~undefined & np.all(np.isfinite(out), axis=1)
        if strict:
            if not ok.all():
                k = int(np.argmin(ok))
                if not inside[k]:
                    raise PointOutsideDomain("point outside the domain", X[k])
                raise PointUndefined("field undefined", X[k])
            return out
        out[~ok] = np.nan
        return out, ok

    def __call__(self, x):
        return evaluate(self, x)

    def to_text(self) -> str:
        return serialize_field(self)

    def without_override(self, index: int = 0) -> "VectorFieldDef":
        """Drop an override and mark its manifold as undefined instead."""
        ov = self.overrides[index]
        rest = self.overrides[:index] + self.overrides[index + 1:]
        excluded = ov.predicate
        if self.domain.excluded is not None:
            def ind(p):
                return Call("if", (p, Num(1.0), Num(0.0)))
            excluded = Compare(">=", Call("max", (ind(self.domain.excluded), ind(ov.predicate))),
                               Num(1.0))
        return replace(self, overrides=rest, domain=replace(self.domain, excluded=excluded))


def evaluate(field: VectorFieldDef, x) -> np.ndarray:
    """f(x) at a single point."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return field.evaluate_many(x)[0]


# --------------------------------------------------------------------------
# file grammar

def _parse_int(tk: Tokenizer, what="integer") -> int:
    tok = tk.next()
    if tok.kind != "number" or not tok.text.isdigit():
        raise FieldSyntaxError(f"expected {what}, found {tok.text or 'end of input'!r}",
                               tok.line, tok.column)
    return int(tok.text)


def _check_len(vec, dim, tok):
    if len(vec) != dim:
        raise ArityError(f"expected {dim} components, got {len(vec)}", tok.line, tok.column)


def parse_field_expr(text: str, domain: DomainSpec | None = None) -> VectorFieldDef:
    """Parse ``dim N; [on PRED => (..);]* f = (..)``."""
    tk = Tokenizer(text)
    tk.expect("dim")
    dim_tok = tk.peek()
    dim = _parse_int(tk, "dimension")
    if dim < 1:
        raise FieldSyntaxError("dimension must be positive", dim_tok.line, dim_tok.column)
    tk.expect(";")
    p = ExprParser(tk, dim)
    overrides = []
    while tk.at("on"):
        tk.next()
        pred = p.predicate()
        tk.expect("=>")
        tok = tk.peek()
        vec = p.vector()
        _check_len(vec, dim, tok)
        tk.expect(";")
        overrides.append(Override(pred, vec))
    tk.expect("f")
    tk.expect("=")
    tok = tk.peek()
    comps = p.vector()
    _check_len(comps, dim, tok)
    if tk.peek().kind != "end":
        raise tk.error(f"unexpected trailing {tk.peek().text!r}")
    return VectorFieldDef(dim, comps, tuple(overrides), domain or DomainSpec())


def _vec_src(vec):
    return "(" + ", ".join(to_source(e) for e in vec) + ")"


def serialize_field(field: VectorFieldDef) -> str:
    parts = [f"dim {field.dim};"]
    for ov in field.overrides:
        parts.append(f"on {to_source(ov.predicate)} => {_vec_src(ov.values)};")
    parts.append(f"f = {_vec_src(field.components)}")
    return " ".join(parts)


def parse_vector_exprs(items: Sequence[str], dim: int | None, extra_vars=()) -> tuple:
    return tuple(parse_expr(s, dim, extra_vars) for s in items)


# --------------------------------------------------------------------------
# germ curves

@dataclass(frozen=True)
class GermCurveDef:
    """A C1 curve phi(eps; x) issued from a base point x.

    ``position`` and ``velocity`` are expressions in ``eps`` and ``x1..xN``
    (the base point).  ``velocity`` may be ``None``; consumers then fall back
    to central differences when asked to.
    """

    position: tuple
    velocity: tuple | None
    eps_max: float = 1.0

    def __post_init__(self):
        if not self.eps_max > 0:
            raise ValueError("eps_max must be positive")
        if self.velocity is not None and len(self.velocity) != len(self.position):
            raise ArityError("position and velocity must have the same length")

    @property
    def dim(self):
        return len(self.position)

    @classmethod
    def from_strings(cls, position, velocity=None, eps_max=1.0):
        dim = len(position)
        pos = parse_vector_exprs(position, dim, ("eps",))
        vel = None if velocity is None else parse_vector_exprs(velocity, dim, ("eps",))
        return cls(pos, vel, eps_max)

    @classmethod
    def ray(cls, base, direction, eps_max=1.0):
        """Straight germ x + eps*d with constant velocity d."""
        pos = tuple(f"x{i + 1} + eps * {float(d)!r}" for i, d in enumerate(direction))
        vel = tuple(repr(float(d)) for d in direction)
        return cls.from_strings(pos, vel, eps_max)

    @cached_property
    def _compiled(self):
        names = ["eps"] + _arg_names(self.dim)
        pos = compile_exprs(self.position, names)
        vel = None if self.velocity is None else compile_exprs(self.velocity, names)
        return pos, vel

    def _run(self, fn, eps, base):
        eps = np.atleast_1d(np.asarray(eps, dtype=float))
        base = np.asarray(base, dtype=float)
        cols = [np.full_like(eps, b) for b in base]
        with np.errstate(all="ignore"):
            vals = fn(eps, *cols)
        return np.stack([np.broadcast_to(np.asarray(v, float), eps.shape) for v in vals], axis=1)

    def position_at(self, eps, base):
        return self._run(self._compiled[0], eps, base)

    def velocity_at(self, eps, base, fd: bool = False):
        if self.velocity is not None and not fd:
            return self._run(self._compiled[1], eps, base)
        eps = np.atleast_1d(np.asarray(eps, dtype=float))
        h = np.where(eps > 0, eps * 1e-4, 1e-10)
        hi = self.position_at(eps + h, base)
        lo = self.position_at(np.maximum(eps - h, 0.0), base)
        return (hi - lo) / (eps + h - np.maximum(eps - h, 0.0))[:, None]


def parse_germ(text: str) -> GermCurveDef:
    """Parse ``dim N; [eps_max NUM;] phi = (..); [dphi = (..)]``."""
    tk = Tokenizer(text)
    tk.expect("dim")
    dim = _parse_int(tk, "dimension")
    tk.expect(";")
    eps_max = 1.0
    if tk.at("eps_max"):
        tk.next()
        tok = tk.next()
        if tok.kind != "number":
            raise FieldSyntaxError("expected a number after eps_max", tok.line, tok.column)
        eps_max = float(tok.text)
        tk.expect(";")
    p = ExprParser(tk, dim, ("eps",))
    tk.expect("phi")
    tk.expect("=")
    tok = tk.peek()
    pos = p.vector()
    _check_len(pos, dim, tok)
    vel = None
    if tk.at(";"):
        tk.next()
        if tk.at("dphi"):
            tk.next()
            tk.expect("=")
            tok = tk.peek()
            vel = p.vector()
            _check_len(vel, dim, tok)
    if tk.peek().kind != "end":
        raise tk.error(f"unexpected trailing {tk.peek().text!r}")
    return GermCurveDef(pos, vel, eps_max)


def parse_gradient(text: str) -> tuple:
    """Parse ``dim N; grad = ((row1), ..., (rowN))`` into N rows of N expressions."""
    tk = Tokenizer(text)
    tk.expect("dim")
    dim = _parse_int(tk, "dimension")
    tk.expect(";")
    p = ExprParser(tk, dim)
    tk.expect("grad")
    tk.expect("=")
    tk.expect("(")
    rows = []
    while True:
        tok = tk.peek()
        row = p.vector()
        _check_len(row, dim, tok)
        rows.append(row)
        if not tk.at(","):
            break
        tk.next()
    tok = tk.expect(")")
    if len(rows) != dim:
        raise ArityError(f"expected {dim} rows, got {len(rows)}", tok.line, tok.column)
    if tk.peek().kind != "end":
        raise tk.error(f"unexpected trailing {tk.peek().text!r}")
    return tuple(rows)


# --------------------------------------------------------------------------
# growth sampling

@dataclass
class GrowthReport:
    max_violation: float
    worst_point: np.ndarray | None
    n_evaluated: int
    n_skipped: int

    def passed(self, rtol: float = 1e-12) -> bool:
        """True unless the bound is exceeded by more than rounding (|f| of a unit vector
        can come out one ulp above 1)."""
        return self.max_violation <= rtol


def _uniform_ball(rng, n, dim, radius):
    g = rng.standard_normal((n, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / dim)
    return g * r[:, None]


def check_growth_sample(field: VectorFieldDef, bound: GrowthBound, n_samples: int,
                        radius: float, seed: int) -> GrowthReport:
    """Largest excess of |f(z)| over c1|z| + c0 on uniform samples of a ball.

    Samples where the field is undefined are skipped and counted.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rng = np.random.default_rng(seed)
    Z = _uniform_ball(rng, n_samples, field.dim, radius)
    F, ok = field.evaluate_many(Z, strict=False)
    Zs, Fs = Z[ok], F[ok]
    excess = np.linalg.norm(Fs, axis=1) - bound(np.linalg.norm(Zs, axis=1))
    worst = None
    viol = 0.0
    if len(excess) and excess.max() > 0:
        k = int(np.argmax(excess))
        viol, worst = float(excess[k]), Zs[k]
    return GrowthReport(viol, worst, int(ok.sum()), int((~ok).sum()))
