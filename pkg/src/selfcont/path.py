"""Piecewise-linear paths and the L1 error functional E(y) = int |y' - f(y)| dt."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .field import GrowthBound, VectorFieldDef

__all__ = [
    "Path", "QuadratureSpec", "ErrorValue", "eval_at", "error_functional",
    "segment_errors", "apriori_bound_check", "concat", "insert_node", "rescale",
    "linear_path", "write_path_csv", "read_path_csv",
]


class Path:
    """Affine interpolant through nodes ``(t_i, x_i)``; immutable."""

    __slots__ = ("t", "x")

    def __init__(self, t, x):
        t = np.array(t, dtype=float)
        x = np.array(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if t.ndim != 1 or len(t) < 2:
            raise ValueError("a path needs at least two nodes")
        if x.shape[0] != len(t):
            raise ValueError("times and positions disagree in length")
        if not np.all(np.diff(t) > 0):
            raise ValueError("node times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(x))):
            raise ValueError("path nodes must be finite")
        t.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)

    def __setattr__(self, name, value):
        raise AttributeError("Path is immutable")

    @property
    def dim(self):
        return self.x.shape[1]

    @property
    def n_segments(self):
        return len(self.t) - 1

    @property
    def t0(self):
        return float(self.t[0])

    @property
    def t_end(self):
        return float(self.t[-1])

    @property
    def duration(self):
        return float(self.t[-1] - self.t[0])

    def __len__(self):
        return len(self.t)

    def __eq__(self, other):
        return (isinstance(other, Path) and np.array_equal(self.t, other.t)
                and np.array_equal(self.x, other.x))

    def __repr__(self):
        return f"Path({len(self.t)} nodes on [{self.t0:g}, {self.t_end:g}], dim={self.dim})"

    def velocities(self):
        return np.diff(self.x, axis=0) / np.diff(self.t)[:, None]

    def __call__(self, t):
        return eval_at(self, t)


def linear_path(x0, x1, t0, t1) -> Path:
    return Path([t0, t1], [x0, x1])


def eval_at(p: Path, t):
    """Affine interpolation; exact node values at node times.

    Accepts a scalar time (returns a vector) or an array of times.
    """
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < p.t[0]) or np.any(t > p.t[-1]):
        raise ValueError(f"time outside [{p.t0}, {p.t_end}]")
    k = np.clip(np.searchsorted(p.t, t, side="right") - 1, 0, len(p.t) - 2)
    ta, tb = p.t[k], p.t[k + 1]
    s = (t - ta) / (tb - ta)
    xa, xb = p.x[k], p.x[k + 1]
    out = xa + s[:, None] * (xb - xa)
    at_b = t == tb
    out[at_b] = xb[at_b]
    return out[0] if scalar else out


# --------------------------------------------------------------------------
# quadrature

@dataclass(frozen=True)
class QuadratureSpec:
    base_subsamples: int = 16
    adaptive: bool = True
    max_depth: int = 6
    jump_threshold: float = 0.5

    def __post_init__(self):
        if self.base_subsamples < 1:
            raise ValueError("base_subsamples must be >= 1")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")


class ErrorValue(NamedTuple):
    value: float
    per_segment: np.ndarray
    depth: np.ndarray  # deepest bisection level reached in each segment


def segment_errors(field: VectorFieldDef, xa, xb, dt, quad: QuadratureSpec = QuadratureSpec(),
                   scale: float = 1.0, strict: bool = True):
    """E over a batch of linear segments ``xa -> xb`` of durations ``dt``.

    Composite midpoint rule with ``quad.base_subsamples`` panels per segment.
    With ``quad.adaptive`` a panel whose field value differs from a
    neighbouring panel's (within the same segment) by more than
    ``jump_threshold * (1 + |v|)`` is bisected, level by level, up to
    ``max_depth`` times.  Segment endpoints are never sampled.

    ``scale`` multiplies the field (integrand |v - scale*f(x)|).

    Returns ``(errors, depth, n_evals)``.  With ``strict=False`` undefined
    samples make the corresponding segment error ``inf`` instead of raising.
    """
    xa = np.asarray(xa, dtype=float)
    xb = np.asarray(xb, dtype=float)
    dt = np.asarray(dt, dtype=float)
    nseg, dim = xa.shape
    n = quad.base_subsamples
    dx = xb - xa
    v = dx / dt[:, None]
    # panels are (segment index, left fraction, width fraction)
    seg, left, width = _layout(nseg, n)
    depth = np.zeros(nseg * n, dtype=int)

    def sample(seg_idx, left_frac, width_frac):
        s = left_frac + 0.5 * width_frac
        pts = xa[seg_idx] + s[:, None] * dx[seg_idx]
        if strict:
            return field.evaluate_many(pts), np.ones(len(pts), dtype=bool)
        return field.evaluate_many(pts, strict=False)

    vals, ok = sample(seg, left, width)
    n_evals = len(seg)
    bad_seg = np.zeros(nseg, dtype=bool)
    if not ok.all():
        bad_seg[seg[~ok]] = True
    thr = quad.jump_threshold * (1.0 + _norm(v))

    if quad.adaptive and n > 1:
        for level in range(quad.max_depth):
            same = seg[1:] == seg[:-1]
            with np.errstate(invalid="ignore"):
                jump = _norm(vals[1:] - vals[:-1])
            flag_pair = same & (jump > thr[seg[1:]])
            flag = np.zeros(len(seg), dtype=bool)
            flag[:-1] |= flag_pair
            flag[1:] |= flag_pair
            if not flag.any():
                break
            idx = np.nonzero(flag)[0]
            half = width[idx] * 0.5
            new_seg = np.repeat(seg[idx], 2)
            new_left = np.empty(2 * len(idx))
            new_left[0::2] = left[idx]
            new_left[1::2] = left[idx] + half
            new_width = np.repeat(half, 2)
            new_vals, new_ok = sample(new_seg, new_left, new_width)
            n_evals += len(new_seg)
            if not new_ok.all():
                bad_seg[new_seg[~new_ok]] = True
            # splice children in place of their parents, preserving order
            keep = ~flag
            counts = np.where(flag, 2, 1)
            total = counts.sum()
            pos = np.cumsum(counts) - counts
            out_seg = np.empty(total, dtype=int)
            out_left = np.empty(total)
            out_width = np.empty(total)
            out_vals = np.empty((total, dim))
            out_depth = np.empty(total, dtype=int)
            kp = pos[keep]
            out_seg[kp], out_left[kp], out_width[kp] = seg[keep], left[keep], width[keep]
            out_vals[kp], out_depth[kp] = vals[keep], depth[keep]
            cp = np.empty(2 * len(idx), dtype=int)
            cp[0::2] = pos[idx]
            cp[1::2] = pos[idx] + 1
            out_seg[cp], out_left[cp], out_width[cp] = new_seg, new_left, new_width
            out_vals[cp] = new_vals
            out_depth[cp] = np.repeat(depth[idx] + 1, 2)
            seg, left, width, vals, depth = out_seg, out_left, out_width, out_vals, out_depth

    with np.errstate(invalid="ignore"):
        resid = _norm(v[seg] - scale * vals) * (width * dt[seg])
    resid[~np.isfinite(resid)] = 0.0
    if len(seg) == nseg * n:
        starts = np.arange(0, nseg * n, n)
    else:
        starts = np.concatenate(([0], np.flatnonzero(seg[1:] != seg[:-1]) + 1))
    errs = np.add.reduceat(resid, starts)
    errs[bad_seg] = np.inf
    seg_depth = np.maximum.reduceat(depth, starts)
    return errs, seg_depth, n_evals


_LAYOUTS = {}


def _layout(nseg, n):
    key = (nseg, n)
    lay = _LAYOUTS.get(key)
    if lay is None:
        lay = (np.repeat(np.arange(nseg), n), np.tile(np.arange(n) / n, nseg),
               np.full(nseg * n, 1.0 / n))
        for a in lay:
            a.setflags(write=False)
        if len(_LAYOUTS) > 256:
            _LAYOUTS.clear()
        _LAYOUTS[key] = lay
    return lay


def _norm(a):
    return np.sqrt(np.einsum("ij,ij->i", a, a))


def error_functional(field: VectorFieldDef, p: Path, quad: QuadratureSpec = QuadratureSpec(),
                     scale: float = 1.0) -> ErrorValue:
    """Discretized E over the whole path, with per-segment contributions."""
    if p.dim != field.dim:
        raise ValueError(f"path dimension {p.dim} != field dimension {field.dim}")
    errs, depth, _ = segment_errors(field, p.x[:-1], p.x[1:], np.diff(p.t), quad, scale)
    return ErrorValue(math.fsum(errs), errs, depth)


# --------------------------------------------------------------------------
# path algebra

def apriori_bound_check(p: Path, bound: GrowthBound, e_value: float):
    """Check |x(t)| <= (T*c0 + |x0| + E) * exp(c1*T) at nodes and segment midpoints.

    Returns ``(holds, margin)``.
    """
    T = p.duration
    limit = (T * bound.c0 + float(np.linalg.norm(p.x[0])) + e_value) * math.exp(bound.c1 * T)
    mids = 0.5 * (p.x[:-1] + p.x[1:])
    biggest = max(float(np.linalg.norm(p.x, axis=1).max()),
                  float(np.linalg.norm(mids, axis=1).max()))
    return biggest <= limit, limit - biggest


def concat(p: Path, q: Path) -> Path:
    """Join two paths sharing their junction node exactly."""
    if p.t[-1] != q.t[0] or not np.array_equal(p.x[-1], q.x[0]):
        raise ValueError("junction mismatch: last node of p must equal first node of q")
    return Path(np.concatenate([p.t, q.t[1:]]), np.concatenate([p.x, q.x[1:]]))


def insert_node(p: Path, t: float) -> Path:
    if not p.t[0] < t < p.t[-1]:
        raise ValueError("insertion time must lie strictly inside the path")
    if np.any(p.t == t):
        raise ValueError(f"a node already exists at t={t!r}")
    k = int(np.searchsorted(p.t, t))
    xt = eval_at(p, t)
    return Path(np.insert(p.t, k, t), np.insert(p.x, k, xt, axis=0))


def rescale(p: Path, s: float) -> Path:
    """Stretch a path on [0, r] to [0, s]: y(tau) = x(r*tau/s)."""
    if p.t[0] != 0:
        raise ValueError("rescale expects a path starting at t=0")
    if not s > 0:
        raise ValueError("target horizon must be positive")
    r = p.t[-1]
    if s == r:
        return p
    t = p.t * (s / r)
    t[-1] = s
    return Path(t, p.x)


# --------------------------------------------------------------------------
# CSV

def write_path_csv(p: Path, fh_or_path):
    header = ["t"] + [f"x{i + 1}" for i in range(p.dim)]
    own = isinstance(fh_or_path, (str, bytes)) or hasattr(fh_or_path, "__fspath__")
    fh = open(fh_or_path, "w", newline="") if own else fh_or_path
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t, x in zip(p.t, p.x):
            w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in x])
    finally:
        if own:
            fh.close()


def read_path_csv(fh_or_path) -> Path:
    own = isinstance(fh_or_path, (str, bytes)) or hasattr(fh_or_path, "__fspath__")
    fh = open(fh_or_path, newline="") if own else fh_or_path
    try:
        rows = list(csv.reader(fh))
    finally:
        if own:
            fh.close()
    header = [h.strip() for h in rows[0]]
    expect = ["t"] + [f"x{i + 1}" for i in range(len(header) - 1)]
    if header != expect or len(header) < 2:
        raise ValueError(f"bad path header {header}; expected t,x1,...,xN")
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    return Path(data[:, 0], data[:, 1:])
