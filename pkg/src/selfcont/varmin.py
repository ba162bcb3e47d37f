"""Derivative-free minimization of E over polyline node positions.

The unknowns are the spatial nodes of a polyline on a uniform time grid.
E is nonsmooth (and discontinuous where f is), so the search is a compass
(pattern) search: try +-step on each coordinate, keep strict decreases, and
halve the step after a full cycle without progress.

Moving node i only changes segments i-1 and i, so all nodes of one parity
are trialled together in a single vectorized batch.  Because same-parity
nodes share no segment, the batch makes exactly the decisions that a
sequential sweep in (parity, node, coordinate) order would make.

``method="multilevel"`` runs the same search on a coarse-to-fine ladder of
uniform grids (9, 17, 33, ... nodes), seeding each level with the previous
optimum.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .expr import compile_exprs, parse_expr
from .field import FieldEvaluationError, VectorFieldDef, evaluate
from .germstep import SnapMode, StepConfig, integrate
from .path import (Path, QuadratureSpec, concat, error_functional, eval_at, linear_path,
                   read_path_csv, segment_errors)

__all__ = [
    "LinearInit", "GermPlainInit", "GermSnapInit", "PathInit", "parse_init", "OptConfig",
    "OptResult", "RestartSummary", "minimize_fixed_start", "minimize_two_point",
    "value_function", "VerifyReport", "verify_generalized", "family_from_exprs",
    "compass_search", "STRATEGIES", "uniform_grid", "resample", "level_sizes",
]


COARSEST_LEVEL = 9

# --------------------------------------------------------------------------
# initializations

@dataclass(frozen=True)
class LinearInit:
    """Straight line from x0 to ``guess`` (default x0 + T f(x0))."""
    guess: tuple | None = None

    def describe(self):
        return "linear" if self.guess is None else "linear:" + ",".join(map(repr, self.guess))


@dataclass(frozen=True)
class GermPlainInit:
    """Plain germ stepping with step ``h`` (default: the node spacing)."""
    h: float | None = None

    def describe(self):
        return "germ-plain" if self.h is None else f"germ-plain:{self.h!r}"


@dataclass(frozen=True)
class GermSnapInit:
    predicate: str
    snap_tol: float = 1e-9
    h: float | None = None

    def describe(self):
        tail = "" if self.h is None else f":{self.h!r}"
        return f"germ-snap:{self.predicate}:{self.snap_tol!r}{tail}"


@dataclass(frozen=True)
class PathInit:
    path: Path
    source: str = "path"

    def describe(self):
        return self.source


def parse_init(text: str):
    """``linear[:v1,v2..] | germ-plain[:h] | germ-snap:PRED[:TOL[:h]] | path:FILE``."""
    kind, _, rest = text.partition(":")
    if kind == "linear":
        return LinearInit(tuple(float(v) for v in rest.split(",")) if rest else None)
    if kind == "germ-plain":
        return GermPlainInit(float(rest) if rest else None)
    if kind == "germ-snap":
        if not rest:
            raise ValueError("germ-snap needs a predicate, e.g. germ-snap:x1 == 0")
        parts = rest.split(":")
        tol = float(parts[1]) if len(parts) > 1 else 1e-9
        h = float(parts[2]) if len(parts) > 2 else None
        return GermSnapInit(parts[0], tol, h)
    if kind == "path":
        if not rest:
            raise ValueError("path init needs a file name")
        return PathInit(read_path_csv(rest), source=text)
    raise ValueError(f"unknown init {text!r}")


@dataclass(frozen=True)
class OptConfig:
    n_nodes: int = 64
    budget: int = 2_000_000
    restarts: int = 8
    seed: int = 0
    init: object = GermPlainInit()
    step0: float | None = None  # None: 0.1 * scale of the initial path
    shrink: float = 0.5
    min_step: float = 1e-9
    jitter: float = 0.05  # relative to scale, for restarts after the first
    method: str = "compass"
    quad: QuadratureSpec = QuadratureSpec()
    workers: int = 1

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ValueError("n_nodes must be at least 2")
        if not self.budget > 0:
            raise ValueError("budget must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if not self.min_step > 0:
            raise ValueError("min_step must be positive")
        if self.step0 is not None and not self.step0 > 0:
            raise ValueError("step0 must be positive")
        if self.method not in STRATEGIES:
            raise ValueError(f"unknown method {self.method!r}")

    def to_dict(self):
        return {"n_nodes": self.n_nodes, "budget": self.budget, "restarts": self.restarts,
                "seed": self.seed, "init": self.init.describe(), "step0": self.step0,
                "shrink": self.shrink, "min_step": self.min_step, "jitter": self.jitter,
                "method": self.method}


@dataclass
class RestartSummary:
    index: int
    e_value: float
    evaluations: int
    terminated_by: str

    def to_dict(self):
        return {"index": self.index, "e_value": self.e_value, "evaluations": self.evaluations,
                "terminated_by": self.terminated_by}


@dataclass
class OptResult:
    path: Path
    e_value: float
    trace: list  # (cumulative evaluations, best E so far)
    restarts_summary: list
    terminated_by: str
    evaluations: int = 0

    def to_dict(self, path_file=None):
        return {"e_value": self.e_value, "terminated_by": self.terminated_by,
                "evaluations": self.evaluations,
                "trace": [[int(n), float(e)] for n, e in self.trace],
                "restarts_summary": [r.to_dict() for r in self.restarts_summary],
                "path_file": path_file}

    def to_json(self, path_file=None, **kw):
        return json.dumps(self.to_dict(path_file), **kw)


# --------------------------------------------------------------------------
# grids and initial paths

def uniform_grid(T, n_nodes):
    t = np.linspace(0.0, float(T), n_nodes)
    t[-1] = float(T)
    return t


def resample(p: Path, t) -> Path:
    return Path(t, eval_at(p, t))


def _stretch_to(p: Path, T) -> Path:
    """Extend a path that ends early by holding its last node (used after truncation)."""
    if p.t_end >= T:
        return p
    return Path(np.append(p.t, T), np.vstack([p.x, p.x[-1]]))


def _initial_nodes(field, x0, T, t, init, end=None):
    x0 = np.asarray(x0, float)
    if isinstance(init, PathInit):
        q = init.path
        if q.dim != field.dim:
            raise ValueError("init path dimension differs from the field")
        if abs(q.t0) > 1e-12 or abs(q.t_end - T) > 1e-9 * max(1.0, T):
            q = Path((q.t - q.t0) * (T / q.duration), q.x)
        X = eval_at(q, t)
        X[0] = x0
    elif isinstance(init, LinearInit):
        if init.guess is not None:
            target = np.asarray(init.guess, float)
        elif end is not None:
            target = np.asarray(end, float)
        else:
            target = x0 + T * evaluate(field, x0)
        X = x0 + (t / T)[:, None] * (target - x0)
    else:
        h = init.h if init.h is not None else T / (len(t) - 1)
        h = min(h, T)
        mode = SnapMode.parse(init.predicate, field.dim, init.snap_tol) \
            if isinstance(init, GermSnapInit) else None
        cfg = StepConfig(h, T) if mode is None else StepConfig(h, T, mode)
        q = integrate(field, x0, cfg).path
        X = eval_at(_stretch_to(q, T), t)
    if end is not None:
        # bend the initial path so that it ends at the prescribed point
        X = X + (t / T)[:, None] * (np.asarray(end, float) - X[-1])
    X[0] = x0
    return X


# --------------------------------------------------------------------------
# the search

@dataclass
class _Run:
    X: np.ndarray
    seg_err: np.ndarray
    evals: int
    trace: list
    terminated_by: str

    @property
    def e_value(self):
        return math.fsum(self.seg_err)


def compass_search(field, t, X, lo, hi, budget, step0, shrink, min_step, quad) -> _Run:
    """Compass search over nodes ``lo..hi-1``; the other nodes stay fixed."""
    X = np.array(X, dtype=float)
    n, dim = X.shape
    dt = np.diff(t)
    seg_err, _, evals = segment_errors(field, X[:-1], X[1:], dt, quad, strict=False)
    if not np.all(np.isfinite(seg_err)):
        raise FieldEvaluationError("initial path meets points where the field is undefined")
    free = np.arange(lo, hi)
    colors = [c for c in (free[free % 2 == 1], free[free % 2 == 0]) if len(c)]
    trace = [(evals, math.fsum(seg_err))]
    step = step0
    while True:
        if trace[-1][1] == 0.0:
            reason = "zero_error"
            break
        if step < min_step:
            reason = "min_step"
            break
        if evals >= budget:
            reason = "budget"
            break
        moved = False
        for idx in colors:
            right = idx < n - 1
            ir = idx[right]
            m = len(idx)
            for d in range(dim):
                if evals >= budget:
                    break
                trial = np.concatenate([X[idx], X[idx]])
                trial[:m, d] += step
                trial[m:, d] -= step
                # left segments for all trials, then right segments where they exist
                xa = np.concatenate([np.tile(X[idx - 1], (2, 1)), trial[np.r_[right, right]]])
                xb = np.concatenate([trial, np.tile(X[ir + 1], (2, 1))])
                dts = np.concatenate([np.tile(dt[idx - 1], 2), np.tile(dt[ir], 2)])
                errs, _, ne = segment_errors(field, xa, xb, dts, quad, strict=False)
                evals += ne
                left_new = errs[:2 * m]
                right_new = np.zeros(2 * m)
                right_new[np.r_[right, right]] = errs[2 * m:]
                new = left_new + right_new
                old_r = np.where(right, seg_err[np.minimum(idx, n - 2)], 0.0)
                old = seg_err[idx - 1] + old_r
                plus = new[:m] < old
                minus = ~plus & (new[m:] < old)
                take = plus | minus
                if not take.any():
                    continue
                moved = True
                k = np.nonzero(take)[0]
                src = np.where(plus[k], k, k + m)
                X[idx[k]] = trial[src]
                seg_err[idx[k] - 1] = left_new[src]
                kr = k[right[k]]
                if len(kr):
                    seg_err[idx[kr]] = right_new[np.where(plus[kr], kr, kr + m)]
        if not moved:
            step *= shrink
        trace.append((evals, math.fsum(seg_err)))
    return _Run(X, seg_err, evals, trace, reason)


def _single_grid(field, t, X, hi, budget, step0, cfg) -> _Run:
    return compass_search(field, t, X, 1, hi, budget, step0, cfg.shrink, cfg.min_step, cfg.quad)


def level_sizes(n_nodes, coarsest=COARSEST_LEVEL):
    """Node counts of the coarse-to-fine ladder: 9, 17, 33, ... and finally ``n_nodes``."""
    sizes = []
    m = coarsest
    while m < n_nodes:
        sizes.append(m)
        m = 2 * m - 1
    return sizes + [n_nodes]


def _multilevel(field, t, X, hi, budget, step0, cfg) -> _Run:
    """Compass search on a ladder of grids, each level seeded by the previous optimum.

    Coarse levels move whole stretches of the path at once, which single-node
    moves on the fine grid cannot do; the budget is split evenly over levels.
    The finest level starts from the better of the refined coarse optimum and
    the original nodes, so the result is never worse than the initial path.
    """
    fixed_end = hi < len(t)
    path = Path(t, X)
    sizes = level_sizes(len(t))
    per_level = max(1, budget // len(sizes))
    trace, evals, run = [], 0, None
    for level, n in enumerate(sizes):
        tl = t if n == len(t) else uniform_grid(t[-1], n)
        Xl = eval_at(path, tl)
        Xl[0] = X[0]
        if fixed_end:
            Xl[-1] = X[-1]
        if n == len(t) and level > 0:
            # keep the starting nodes if refining the coarse optimum lost to them
            e_new, _, ne1 = segment_errors(field, Xl[:-1], Xl[1:], np.diff(t), cfg.quad,
                                           strict=False)
            e_old, _, ne2 = segment_errors(field, X[:-1], X[1:], np.diff(t), cfg.quad,
                                           strict=False)
            evals += ne1 + ne2
            if not math.fsum(e_new) < math.fsum(e_old):
                Xl = np.array(X, dtype=float)
        run = compass_search(field, tl, Xl, 1, n - 1 if fixed_end else n, per_level,
                             step0 / 2 ** level, cfg.shrink, cfg.min_step, cfg.quad)
        trace.extend((evals + k, e) for k, e in run.trace)
        evals += run.evals
        path = Path(tl, run.X)
        if run.e_value == 0.0:
            if n != len(t):  # an exact zero on a coarse grid stays exact when refined
                Xf = eval_at(path, t)
                seg, _, ne = segment_errors(field, Xf[:-1], Xf[1:], np.diff(t), cfg.quad,
                                            strict=False)
                evals += ne
                run = _Run(Xf, seg, 0, [], "zero_error")
                trace.append((evals, run.e_value))
            break
    return _Run(run.X, run.seg_err, evals, trace, run.terminated_by)


STRATEGIES = {"compass": _single_grid, "multilevel": _multilevel}


def _scale_of(X, field, x0, T):
    ext = float(np.max(np.ptp(X, axis=0)))
    if ext > 0:
        return ext
    fx = np.linalg.norm(evaluate(field, x0))
    return T * fx if fx > 0 else 1.0


def _optimize(field, x0, T, cfg: OptConfig, end=None, X_init=None) -> OptResult:
    t = uniform_grid(T, cfg.n_nodes)
    X0 = X_init if X_init is not None else _initial_nodes(field, x0, T, t, cfg.init, end)
    hi = cfg.n_nodes - 1 if end is not None else cfg.n_nodes
    if end is not None:
        X0 = X0.copy()
        X0[-1] = np.asarray(end, float)
    scale = _scale_of(X0, field, np.asarray(x0, float), T)
    step0 = cfg.step0 if cfg.step0 is not None else 0.1 * scale
    per_restart = max(1, cfg.budget // cfg.restarts)
    search = STRATEGIES[cfg.method]

    def start(k):
        X = X0.copy()
        if k > 0 and hi > 1:
            rng = np.random.default_rng([cfg.seed, k])
            X[1:hi] += cfg.jitter * scale * rng.standard_normal((hi - 1, X.shape[1]))
        return X

    def run(k):
        return search(field, t, start(k), hi, per_restart, step0, cfg)

    runs = []
    if cfg.workers > 1 and cfg.restarts > 1:
        first = run(0)
        runs.append(first)
        if first.e_value != 0.0:
            with ThreadPoolExecutor(cfg.workers) as ex:
                rest = list(ex.map(run, range(1, cfg.restarts)))
            for r in rest:
                runs.append(r)
                if r.e_value == 0.0:
                    break
    else:
        for k in range(cfg.restarts):
            r = run(k)
            runs.append(r)
            if r.e_value == 0.0:
                break  # later restarts cannot improve on an exact zero

    trace, offset, best_so_far = [], 0, math.inf
    for r in runs:
        for n_ev, e in r.trace:
            best_so_far = min(best_so_far, e)
            trace.append((offset + n_ev, best_so_far))
        offset += r.evals
    best = min(range(len(runs)), key=lambda k: (runs[k].e_value, k))
    path = Path(t, runs[best].X)
    e_value = error_functional(field, path, cfg.quad).value
    summary = [RestartSummary(k, r.e_value, r.evals, r.terminated_by) for k, r in enumerate(runs)]
    return OptResult(path, e_value, trace, summary, runs[best].terminated_by, offset)


def minimize_fixed_start(field: VectorFieldDef, x0, T: float, cfg: OptConfig = OptConfig()):
    """Estimate m(T) = inf E over paths on [0, T] starting at x0 (an upper bound)."""
    if not T > 0:
        raise ValueError("T must be positive")
    return _optimize(field, x0, T, cfg)


def minimize_two_point(field: VectorFieldDef, x0, z, r: float, cfg: OptConfig | None = None):
    """Estimate G(z) = inf E over paths on [0, r] from x0 to z."""
    if not r > 0:
        raise ValueError("r must be positive")
    if cfg is None:
        cfg = OptConfig()
    if len(z) != field.dim:
        raise ValueError("endpoint dimension differs from the field")
    return _optimize(field, x0, r, cfg, end=z)


def value_function(field: VectorFieldDef, x0, r_grid, cfg: OptConfig = OptConfig()):
    """m_estimate on an increasing grid of horizons.

    Each horizon after the first starts from the previous optimum extended by
    one plain germ step, resampled onto the new uniform grid; if the
    configured initialization is better at that horizon it is used instead.
    """
    r_grid = [float(r) for r in r_grid]
    if not r_grid or r_grid[0] <= 0 or any(b <= a for a, b in zip(r_grid, r_grid[1:])):
        raise ValueError("r_grid must be positive and strictly increasing")
    out, results, prev = [], [], None
    for r in r_grid:
        X_init = None
        if prev is not None:
            end = prev.x[-1]
            tail = linear_path(end, end + (r - prev.t_end) * evaluate(field, end), prev.t_end, r)
            t = uniform_grid(r, cfg.n_nodes)
            warm = eval_at(concat(prev, tail), t)
            fresh = _initial_nodes(field, x0, r, t, cfg.init)
            e_w, _, _ = segment_errors(field, warm[:-1], warm[1:], np.diff(t), cfg.quad, strict=False)
            e_f, _, _ = segment_errors(field, fresh[:-1], fresh[1:], np.diff(t), cfg.quad, strict=False)
            X_init = warm if math.fsum(e_w) <= math.fsum(e_f) else fresh
        res = _optimize(field, x0, r, cfg, X_init=X_init)
        out.append((r, res.e_value))
        results.append(res)
        prev = res.path
    return out, results


# --------------------------------------------------------------------------
# generalized-solution surrogate

@dataclass
class VerifyReport:
    per_j: list  # (j, E_j, sup_dist_j, start_dist_j)
    accepted: bool
    failing_clause: str | None
    tol_e: float
    tol_sup: float
    note: str = ("surrogate check: weak W^{1,1} convergence is replaced by sup-norm convergence "
                 "together with E(x_j) -> 0; equi-integrability is not checked")

    def to_dict(self):
        return {"per_j": [{"j": j, "E": e, "sup_dist": s, "start_dist": s0}
                          for j, e, s, s0 in self.per_j],
                "verdict": "accepted" if self.accepted else "rejected",
                "failing_clause": self.failing_clause, "tol_e": self.tol_e,
                "tol_sup": self.tol_sup, "note": self.note}


def _sup_distance(p: Path, q: Path):
    # both are affine between nodes, so the sup is attained on the union of node times
    t = np.union1d(p.t, q.t)
    return float(np.max(np.linalg.norm(eval_at(p, t) - eval_at(q, t), axis=1)))


def verify_generalized(field: VectorFieldDef, x: Path, family, j_list, tol_e: float = 1e-3,
                       tol_sup: float = 0.05, quad: QuadratureSpec = QuadratureSpec()):
    """Check that ``family(j)`` approaches ``x`` with vanishing E.

    Clauses, in order: starting points approach x(0) (distance at the largest j
    within ``tol_sup``), E(x_j) non-increasing in j with final value within
    ``tol_e``, and sup-distance at the largest j within ``tol_sup``.
    """
    j_list = sorted(int(j) for j in j_list)
    if not j_list:
        raise ValueError("j_list is empty")
    rows = []
    for j in j_list:
        xj = family(j)
        if abs(xj.t0 - x.t0) > 1e-12 or abs(xj.t_end - x.t_end) > 1e-9 * max(1.0, x.t_end):
            raise ValueError(f"horizon mismatch for j={j}: [{xj.t0}, {xj.t_end}] vs "
                             f"[{x.t0}, {x.t_end}]")
        e = error_functional(field, xj, quad).value
        rows.append((j, e, _sup_distance(x, xj), float(np.linalg.norm(xj.x[0] - x.x[0]))))
    es = [r[1] for r in rows]
    clause = None
    if rows[-1][3] > tol_sup:
        clause = "start: x_j(0) does not approach x(0)"
    elif any(b > a + 1e-12 * max(1.0, a) for a, b in zip(es, es[1:])) or es[-1] > tol_e:
        clause = "error: E(x_j) is not decreasing to within tol_e"
    elif rows[-1][2] > tol_sup:
        clause = "distance: sup |x_j - x| exceeds tol_sup at the largest j"
    return VerifyReport(rows, clause is None, clause, tol_e, tol_sup)


def family_from_exprs(exprs, t_grid):
    """Paths ``j -> (t, e(t, j))`` from expressions in ``t`` and ``j`` on a fixed time grid."""
    nodes = [parse_expr(s, 0, ("t", "j")) for s in exprs]
    fn = compile_exprs(nodes, ["t", "j"])
    t_grid = np.asarray(t_grid, float)

    def family(j):
        with np.errstate(all="ignore"):
            vals = fn(t_grid, float(j))
        X = np.stack([np.broadcast_to(np.asarray(v, float), t_grid.shape) for v in vals], axis=1)
        return Path(t_grid, X)

    return family
