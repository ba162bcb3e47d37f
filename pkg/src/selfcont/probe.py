"""Sampling tests for self-continuity of a field at a point.

The ray test samples ``d_k = |f(x + eps_k f(x)) - f(x)|`` along a geometric
schedule ``eps_k -> 0``; the germ test replaces the ray by a user curve and
measures ``|phi'(eps_k) - f(phi(eps_k))|``.  A one-sided limit can only be
sampled, so the verdict is ternary.
"""
from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from .field import FieldEvaluationError, GermCurveDef, VectorFieldDef, evaluate

__all__ = [
    "Verdict", "ProbeSchedule", "ProbeReport", "decide_verdict", "probe_ray", "probe_germ",
    "ExtensionCandidate", "NoExtensionFound", "fit_germ_direction", "probe_grid",
    "direction_grid",
]


class Verdict(str, enum.Enum):
    SELF_CONTINUOUS = "SelfContinuous"
    NOT_SELF_CONTINUOUS = "NotSelfContinuous"
    INCONCLUSIVE = "Inconclusive"
    TRIVIALLY_SELF_CONTINUOUS = "TriviallySelfContinuous"
    UNDEFINED = "Undefined"  # probe_grid only: f is not defined at the node

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ProbeSchedule:
    eps0: float = 1e-2
    ratio: float = 0.5
    count: int = 24
    tol: float = 1e-6
    stall_threshold: float = 1e-3

    def __post_init__(self):
        if not self.eps0 > 0:
            raise ValueError("eps0 must be positive")
        if not 0 < self.ratio < 1:
            raise ValueError("ratio must lie in (0, 1)")
        if self.count < 4:
            raise ValueError("count must be at least 4")
        if not (self.tol > 0 and self.stall_threshold > 0):
            raise ValueError("tolerances must be positive")
        if not self.eps0 * self.ratio ** (self.count - 1) > 1e-300:
            raise ValueError("schedule underflows")

    @property
    def tail_length(self):
        return max(4, self.count // 4)

    def epsilons(self, eps0=None):
        e0 = self.eps0 if eps0 is None else eps0
        return e0 * self.ratio ** np.arange(self.count)


@dataclass
class ProbeReport:
    point: np.ndarray
    residuals: list  # (eps_k, d_k), eps strictly decreasing
    verdict: Verdict
    limit_estimate: np.ndarray | None = None
    diagnostics: str = ""

    def to_dict(self):
        return {
            "point": [float(v) for v in self.point],
            "residuals": [[float(e), float(d)] for e, d in self.residuals],
            "verdict": self.verdict.value,
            "limit_estimate": None if self.limit_estimate is None
            else [float(v) for v in self.limit_estimate],
            "diagnostics": self.diagnostics,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def decide_verdict(residuals, sched: ProbeSchedule) -> Verdict:
    """Ternary decision from the tail of the residual sequence."""
    d = [r for _, r in residuals] if residuals and isinstance(residuals[0], tuple) else list(residuals)
    if not d:
        return Verdict.INCONCLUSIVE
    tail = d[-sched.tail_length:]
    hi, lo = max(tail), min(tail)
    if hi <= sched.tol:
        return Verdict.SELF_CONTINUOUS
    if lo >= sched.stall_threshold and hi - lo <= 0.1 * lo:
        return Verdict.NOT_SELF_CONTINUOUS
    return Verdict.INCONCLUSIVE


MAX_SHRINKS = 40


def _sample_schedule(sched, sampler):
    """Run ``sampler(eps) -> (d, fvals, ok)`` over the schedule, shrinking on domain exits."""
    eps0 = sched.eps0
    shrinks = 0
    while True:
        eps = sched.epsilons(eps0)
        d, fvals, ok = sampler(eps)
        if ok.sum() >= sched.tail_length or shrinks >= MAX_SHRINKS or eps[-1] * sched.ratio < 1e-300:
            return eps, d, fvals, ok, shrinks
        eps0 *= sched.ratio
        shrinks += 1


def _report(point, eps, d, fvals, ok, shrinks, sched):
    residuals = [(float(e), float(r)) for e, r, g in zip(eps, d, ok) if g]
    notes = []
    if shrinks:
        notes.append(f"eps0 shrunk {shrinks} time(s) after domain exits")
    skipped = int((~ok).sum())
    if skipped:
        notes.append(f"{skipped} sample(s) skipped (outside domain or undefined)")
    if not residuals:
        notes.append("no admissible eps: every sample point undefined or outside the domain")
        return ProbeReport(point, [], Verdict.INCONCLUSIVE, None, "; ".join(notes))
    verdict = decide_verdict([r for _, r in residuals], sched)
    limit = fvals[ok][-1].copy()
    return ProbeReport(point, residuals, verdict, limit, "; ".join(notes))


def probe_ray(field: VectorFieldDef, x, sched: ProbeSchedule = ProbeSchedule()) -> ProbeReport:
    """Ray test of self-continuity at ``x``.

    >>> from selfcont.field import parse_field_expr
    >>> rot = parse_field_expr("dim 2; f = (x2, -x1)")
    >>> probe_ray(rot, [1.0, 0.0]).verdict.value
    'SelfContinuous'
    """
    x = np.asarray(x, dtype=float)
    fx = evaluate(field, x)
    if not np.any(fx):
        return ProbeReport(x, [], Verdict.TRIVIALLY_SELF_CONTINUOUS, None,
                           "f(x) = 0: the condition is void")

    def sampler(eps):
        pts = x + eps[:, None] * fx
        fv, ok = field.evaluate_many(pts, strict=False)
        with np.errstate(invalid="ignore"):
            d = np.sqrt(np.sum((fv - fx) ** 2, axis=1))
        return d, fv, ok

    return _report(x, *_sample_schedule(sched, sampler), sched)


def probe_germ(field: VectorFieldDef, germ: GermCurveDef, x, sched: ProbeSchedule = ProbeSchedule(),
               fd: bool = False, base_tol: float = 1e-9) -> ProbeReport:
    """Germ-curve test: residuals ``|phi'(eps_k) - f(phi(eps_k))|``.

    ``fd`` differentiates the position numerically (central differences,
    step ``eps_k * 1e-4``) instead of using the germ's velocity expressions.
    """
    x = np.asarray(x, dtype=float)
    if germ.dim != field.dim:
        raise ValueError("germ and field dimensions differ")
    if germ.velocity is None and not fd:
        raise ValueError("germ has no velocity expressions; pass fd=True")
    fx = evaluate(field, x)
    phi0 = germ.position_at(0.0, x)[0]
    if np.max(np.abs(phi0 - x)) > base_tol:
        raise ValueError(f"germ does not start at the base point: phi(0) = {phi0}")
    dphi0 = germ.velocity_at(0.0, x, fd=fd)[0]
    if np.max(np.abs(dphi0 - fx)) > base_tol:
        raise ValueError(f"germ velocity at 0 is {dphi0}, but f(x) = {fx}")

    def sampler(eps):
        in_range = eps < germ.eps_max
        pos = germ.position_at(eps, x)
        vel = germ.velocity_at(eps, x, fd=fd)
        fv, ok = field.evaluate_many(np.where(np.isfinite(pos), pos, 0.0), strict=False)
        ok &= in_range & np.all(np.isfinite(pos), axis=1) & np.all(np.isfinite(vel), axis=1)
        with np.errstate(invalid="ignore"):
            d = np.sqrt(np.sum((vel - fv) ** 2, axis=1))
        return d, fv, ok

    return _report(x, *_sample_schedule(sched, sampler), sched)


# --------------------------------------------------------------------------
# pointwise extension search

@dataclass
class ExtensionCandidate:
    point: np.ndarray
    direction: np.ndarray
    speed: float
    tail_residual: float
    equilibrium: bool = False

    @property
    def value(self):
        """The proposed value f(x0) = speed * direction."""
        return self.speed * self.direction

    def to_dict(self):
        return {"found": True, "point": self.point.tolist(), "direction": self.direction.tolist(),
                "speed": self.speed, "value": self.value.tolist(),
                "tail_residual": self.tail_residual, "equilibrium": self.equilibrium}


@dataclass
class NoExtensionFound:
    point: np.ndarray
    best_residual: float
    best_direction: np.ndarray | None = None
    best_speed: float | None = None

    def to_dict(self):
        return {"found": False, "point": self.point.tolist(), "best_residual": self.best_residual,
                "best_direction": None if self.best_direction is None else self.best_direction.tolist(),
                "best_speed": self.best_speed}


def _fibonacci_sphere(n):
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    rho = np.sqrt(1 - z * z)
    phi = math.pi * (3 - math.sqrt(5)) * k
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def direction_grid(dim, n_dirs):
    """Uniform unit directions: angles on the circle, Fibonacci points on the sphere."""
    if dim == 2:
        th = 2 * math.pi * np.arange(n_dirs) / n_dirs
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    if dim == 3:
        return _fibonacci_sphere(n_dirs)
    raise ValueError(f"direction search supports dim 2 or 3, not {dim}")


def _refine_around(e, spacing, dim):
    """Neighbours of ``e`` at angular distance ``spacing``."""
    if dim == 2:
        th = math.atan2(e[1], e[0])
        return np.array([[math.cos(th - spacing), math.sin(th - spacing)],
                         [math.cos(th + spacing), math.sin(th + spacing)]])
    # orthonormal tangent frame at e, 8 neighbours
    a = np.array([1.0, 0, 0]) if abs(e[0]) < 0.9 else np.array([0, 1.0, 0])
    u = np.cross(e, a)
    u /= np.linalg.norm(u)
    w = np.cross(e, u)
    ang = 2 * math.pi * np.arange(8) / 8
    tang = np.cos(ang)[:, None] * u + np.sin(ang)[:, None] * w
    out = math.cos(spacing) * e + math.sin(spacing) * tang
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def fit_germ_direction(field: VectorFieldDef, x, n_dirs: int | None = None,
                       speeds=(0.05, 20.0, 24), sched: ProbeSchedule = ProbeSchedule(),
                       allow_equilibrium: bool = False):
    """Search a value ``s*e`` for f(x) that would make f self-continuous at ``x``.

    For every grid direction ``e`` and speed ``s`` the tail residual
    ``max_k |f(x + eps_k s e) - s e|`` is taken over the last quarter of the
    schedule.  The best direction is refined twice at half the angular
    spacing, and each direction's best speed is polished once to the mean
    tail projection ``f . e`` (this lands exactly on speeds the geometric grid
    misses).  Ties go to the lower (direction index, speed index).
    ``f`` need not be defined at ``x`` itself.
    """
    x = np.asarray(x, dtype=float)
    dim = field.dim
    if n_dirs is None:
        n_dirs = 64 if dim == 2 else 512
    dirs = direction_grid(dim, n_dirs)
    s_min, s_max, n_speeds = speeds
    grid_speeds = np.geomspace(s_min, s_max, int(n_speeds))
    eps = sched.epsilons()
    tail = eps[-max(1, sched.count // 4):]

    def tail_fvals(directions):
        # positions x + eps*s*e only depend on eps*s; sample f once per (e, eps*s)
        steps = tail[None, :, None] * grid_speeds[:, None, None]  # (S, K, 1)
        pts = x + steps[None] * directions[:, None, None, :]  # (D, S, K, N)
        fv, ok = field.evaluate_many(pts.reshape(-1, dim), strict=False)
        return fv.reshape(pts.shape), ok.reshape(pts.shape[:3])

    def score(directions):
        fv, ok = tail_fvals(directions)
        target = grid_speeds[None, :, None, None] * directions[:, None, None, :]
        with np.errstate(invalid="ignore"):
            r = np.sqrt(np.sum((fv - target) ** 2, axis=-1))
        r = np.where(ok, r, -np.inf).max(axis=2)  # max over admissible tail samples
        r[~ok.any(axis=2)] = np.inf
        best_s = np.argmin(r, axis=1)
        best_r = r[np.arange(len(directions)), best_s]
        # polish: the speed that matches the tail projection of f on e
        polished = np.full(len(directions), np.inf)
        pol_speed = np.full(len(directions), np.nan)
        for i, e in enumerate(directions):
            s_idx = best_s[i]
            if not np.isfinite(best_r[i]):
                continue
            good = ok[i, s_idx]
            proj = float(np.mean(fv[i, s_idx][good] @ e))
            if proj > 0:
                pts = x + (tail * proj)[:, None] * e
                fv2, ok2 = field.evaluate_many(pts, strict=False)
                if ok2.any():
                    polished[i] = float(np.max(np.linalg.norm(fv2[ok2] - proj * e, axis=1)))
                    pol_speed[i] = proj
        use_pol = polished < best_r
        res = np.where(use_pol, polished, best_r)
        spd = np.where(use_pol, pol_speed, grid_speeds[best_s])
        return res, spd

    res, spd = score(dirs)
    if not np.any(np.isfinite(res)):
        raise FieldEvaluationError("all sample points around the base point are undefined", x)
    all_dirs, all_res, all_spd = [dirs], [res], [spd]
    best = int(np.argmin(res))
    best_e = dirs[best]
    spacing = 2 * math.pi / n_dirs if dim == 2 else math.sqrt(4 * math.pi / n_dirs)
    for _ in range(2):
        spacing /= 2
        cand = _refine_around(best_e, spacing, dim)
        r2, s2 = score(cand)
        all_dirs.append(cand)
        all_res.append(r2)
        all_spd.append(s2)
        k = int(np.argmin(r2))
        if r2[k] < np.concatenate(all_res[:-1]).min():
            best_e = cand[k]
    D = np.concatenate(all_dirs)
    R = np.concatenate(all_res)
    S = np.concatenate(all_spd)
    k = int(np.argmin(R))  # first minimal index wins ties
    if R[k] <= 10 * sched.tol:
        return ExtensionCandidate(x, D[k], float(S[k]), float(R[k]))
    if allow_equilibrium:
        return ExtensionCandidate(x, np.zeros(dim), 0.0, 0.0, equilibrium=True)
    return NoExtensionFound(x, float(R[k]), D[k], float(S[k]))


# --------------------------------------------------------------------------
# grids

def probe_grid(field: VectorFieldDef, lo, hi, resolution, sched: ProbeSchedule = ProbeSchedule(),
               workers: int = 1):
    """Ray verdicts on a tensor grid over the box [lo, hi]; index order output."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    resolution = list(resolution)
    if len(resolution) != field.dim or any(r < 2 for r in resolution):
        raise ValueError("need at least 2 grid nodes per axis")
    axes = [np.linspace(a, b, r) for a, b, r in zip(lo, hi, resolution)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, field.dim)

    def one(p):
        try:
            return p, probe_ray(field, p, sched).verdict
        except FieldEvaluationError:
            return p, Verdict.UNDEFINED

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(one, mesh))
    return [one(p) for p in mesh]
