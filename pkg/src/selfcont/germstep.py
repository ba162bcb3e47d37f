"""Germ-assembly integrator: chain linear germs x -> x + h f(x), or user germ curves.

Snap mode adds one thing to plain stepping: when a step crosses (or lands
within ``snap_tol`` of) a user-named manifold ``lhs == rhs``, the new node is
placed on the manifold, so sliding motion along it can be represented
exactly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .expr import BinOp, Compare, Num, Var, compile_exprs, parse_predicate, to_source
from .field import FieldEvaluationError, GermCurveDef, VectorFieldDef, _arg_names
from .path import Path, QuadratureSpec, segment_errors

__all__ = ["PlainMode", "GermMode", "SnapMode", "StepConfig", "StepResult", "integrate",
           "GERM_CHORD_SAMPLES", "SNAP_BISECTIONS"]

GERM_CHORD_SAMPLES = 8  # interior samples of phi per germ step
SNAP_BISECTIONS = 20


@dataclass(frozen=True)
class PlainMode:
    def describe(self):
        return "plain"


@dataclass(frozen=True)
class GermMode:
    germ: GermCurveDef

    def describe(self):
        return "germ"


@dataclass(frozen=True)
class SnapMode:
    predicate: Compare
    snap_tol: float

    def __post_init__(self):
        if not self.snap_tol > 0:
            raise ValueError("snap_tol must be positive")
        if self.predicate.op not in ("==",):
            raise ValueError("snap predicate must be an equation lhs == rhs")

    @classmethod
    def parse(cls, text: str, dim: int, snap_tol: float):
        return cls(parse_predicate(text, dim), snap_tol)

    def describe(self):
        return f"snap:{to_source(self.predicate)}:{self.snap_tol!r}"


@dataclass(frozen=True)
class StepConfig:
    h: float
    t_end: float
    mode: object = PlainMode()

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError("h must be positive")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.h > self.t_end:
            raise ValueError("h must not exceed t_end")
        if isinstance(self.mode, GermMode) and self.h > self.mode.germ.eps_max:
            raise ValueError("h exceeds the germ's eps_max")


@dataclass
class StepResult:
    path: Path
    e_per_step: np.ndarray
    e_total: float
    truncated: bool
    h: float
    mode: str
    diagnostics: str = ""

    @property
    def steps(self):
        return len(self.e_per_step)

    def to_dict(self):
        return {"h": self.h, "mode": self.mode, "steps": self.steps, "E_total": self.e_total,
                "E_per_step": [float(e) for e in self.e_per_step], "truncated": self.truncated,
                "diagnostics": self.diagnostics}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _eval(field, x):
    vals, ok = field.evaluate_many(x[None, :], strict=False)
    return vals[0] if ok[0] else None


class _Manifold:
    """g(x) = lhs - rhs for a predicate ``lhs == rhs``, with an exact coordinate snap
    when the predicate reads ``xi == c``."""

    def __init__(self, pred: Compare, dim: int):
        self._g = compile_exprs([BinOp("-", pred.left, pred.right)], _arg_names(dim))
        self.dim = dim
        self.coord = None
        left, right = pred.left, pred.right
        if isinstance(right, Var) and isinstance(left, Num):
            left, right = right, left
        if isinstance(left, Var) and isinstance(right, Num):
            self.coord = (int(left.name[1:]) - 1, float(right.value))

    def g(self, x):
        with np.errstate(all="ignore"):
            return float(self._g(*x)[0])

    def grad(self, x):
        h = 1e-7 * max(1.0, float(np.max(np.abs(x))))
        out = np.empty(self.dim)
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = h
            out[i] = (self.g(x + e) - self.g(x - e)) / (2 * h)
        return out

    def finish(self, z):
        if self.coord is not None:
            z = z.copy()
            z[self.coord[0]] = self.coord[1]
        return z


def _snap(man: _Manifold, xk, y, tol):
    """Return (node, fraction of the step) after snapping, or None to keep ``y``."""
    gk, gy = man.g(xk), man.g(y)
    if not (math.isfinite(gk) and math.isfinite(gy)):
        return None
    if gk * gy < 0:
        lo, hi, glo = 0.0, 1.0, gk
        for _ in range(SNAP_BISECTIONS):
            mid = 0.5 * (lo + hi)
            gm = man.g(xk + mid * (y - xk))
            if gm == 0:
                lo = hi = mid
                break
            if (gm < 0) == (glo < 0):
                lo, glo = mid, gm
            else:
                hi = mid
        lam = 0.5 * (lo + hi)
        return man.finish(xk + lam * (y - xk)), lam
    if gy == 0:
        return None
    grad = man.grad(y)
    gn = float(grad @ grad)
    if gn > 0 and abs(gy) / math.sqrt(gn) <= tol:
        z = man.finish(y - gy * grad / gn)
        if np.linalg.norm(z - y) <= np.linalg.norm(y - xk):
            return z, 1.0
    return None


def integrate(field: VectorFieldDef, x0, cfg: StepConfig,
              quad: QuadratureSpec = QuadratureSpec()) -> StepResult:
    """Assemble germs from ``x0`` over ``[0, cfg.t_end]``.

    >>> from selfcont.field import parse_field_expr
    >>> res = integrate(parse_field_expr("dim 1; f = (1)"), [0.0], StepConfig(0.25, 1.0))
    >>> res.path.x[:, 0].tolist(), res.e_total
    ([0.0, 0.25, 0.5, 0.75, 1.0], 0.0)
    """
    x = np.asarray(x0, dtype=float)
    if x.shape != (field.dim,):
        raise ValueError(f"x0 must have {field.dim} components")
    mode = cfg.mode
    h, T = cfg.h, cfg.t_end
    if not isinstance(mode, GermMode) and _eval(field, x) is None:
        raise FieldEvaluationError("field undefined at the initial point", x)
    man = _Manifold(mode.predicate, field.dim) if isinstance(mode, SnapMode) else None

    times, nodes, step_of = [0.0], [x], []
    notes = []
    truncated = False
    t = 0.0
    k = 0
    min_dt = 1e-12 * max(1.0, T)
    while T - t > min_dt:
        dt = min(h, T - t)
        if isinstance(mode, GermMode):
            s = dt * np.arange(1, GERM_CHORD_SAMPLES + 2) / (GERM_CHORD_SAMPLES + 1)
            pts = mode.germ.position_at(s, x)
            if not np.all(np.isfinite(pts)):
                raise FloatingPointError(f"germ produced a non-finite point at step {k}")
            times.extend(t + s)
            nodes.extend(pts)
            step_of.extend([k] * len(s))
            x, t = pts[-1], t + dt
            k += 1
            continue
        fx = _eval(field, x)
        if fx is None:
            truncated = True
            notes.append(f"field undefined at t={t!r}; truncated")
            break
        with np.errstate(over="ignore", invalid="ignore"):
            y = x + dt * fx  # overflow is reported just below
        if not np.all(np.isfinite(y)):
            raise FloatingPointError(f"non-finite state at step {k}")
        t_new = t + dt
        if man is not None:
            snapped = _snap(man, x, y, mode.snap_tol)
            if snapped is not None:
                z, lam = snapped
                if lam * dt > min_dt:
                    y = z
                    t_new = t + lam * dt
        times.append(t_new)
        nodes.append(y)
        step_of.append(k)
        x, t = y, t_new
        k += 1

    if len(nodes) < 2:
        raise FieldEvaluationError("no step could be taken from the initial point", np.asarray(x0))
    X = np.array(nodes)
    tt = np.array(times)
    if not truncated and abs(tt[-1] - T) <= min_dt:
        tt[-1] = T
    step_of = np.array(step_of)
    errs, _, _ = segment_errors(field, X[:-1], X[1:], np.diff(tt), quad, strict=False)
    bad = np.flatnonzero(~np.isfinite(errs))
    if len(bad):
        cut = int(bad[0])
        # drop the whole step containing the first segment that meets an undefined point
        first = int(np.searchsorted(step_of, step_of[cut]))
        if first == 0:
            raise FieldEvaluationError("field undefined along the first step", np.asarray(x0))
        X, tt, step_of, errs = X[:first + 1], tt[:first + 1], step_of[:first], errs[:first]
        truncated = True
        notes.append(f"segment through an undefined point near t={tt[-1]!r}; truncated")
    starts = np.concatenate(([0], np.flatnonzero(np.diff(step_of)) + 1))
    per_step = np.add.reduceat(errs, starts)
    return StepResult(Path(tt, X), per_step, math.fsum(errs), truncated, h, mode.describe(),
                      "; ".join(notes))
