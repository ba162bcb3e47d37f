"""Integrability of |x - x0|^(-N) |grad u(x) (x - x0)| near a point.

In spherical coordinates x = x0 + r e the weight r^(-N) cancels the volume
factor r^(N-1) and the r in (x - x0), leaving the integrand |grad u(x0 + r e) e|
against dr dsigma(e).  The ball is cut into log-spaced annuli reaching down to
rho * 1e-8; the growth of the annulus increments decides the verdict.
"""
from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .expr import compile_exprs
from .field import FieldEvaluationError, VectorFieldDef, _arg_names, parse_gradient
from .probe import direction_grid

__all__ = ["AnalyticGradient", "FiniteDifferenceGradient", "IntegrabilityVerdict",
           "IntegrabilityReport", "check_integrability", "sphere_area", "shell_radii",
           "RADIAL_POINTS", "NOISE_FLOOR"]

RADIAL_POINTS = 16
DECADES = 8
TAIL = 5
# increments this small (relative) are at the rounding level of a central
# difference with relative step 1e-6; the ratio test ignores them
NOISE_FLOOR = 1e-9


class AnalyticGradient:
    """grad u from an N x N matrix of expressions; row i holds d u_i / d x_j."""

    kind = "analytic"

    def __init__(self, rows):
        self.rows = tuple(tuple(r) for r in rows)
        n = len(self.rows)
        if any(len(r) != n for r in self.rows):
            raise ValueError("gradient matrix must be square")
        self.dim = n
        self._fn = compile_exprs([e for r in self.rows for e in r], _arg_names(n))

    @classmethod
    def parse(cls, text: str):
        return cls(parse_gradient(text))

    def directional(self, u, X, E, x0):
        with np.errstate(all="ignore"):
            vals = self._fn(*X.T)
        n = self.dim
        J = np.stack([np.broadcast_to(np.asarray(v, float), (len(X),)) for v in vals], axis=1)
        return np.einsum("kij,kj->ki", J.reshape(len(X), n, n), E)


class FiniteDifferenceGradient:
    """Central difference of u along e with step ``step_scale * |x - x0|``.

    Differencing along e gives grad u(x) e directly, which is all the
    integrand needs.
    """

    kind = "fd"

    def __init__(self, step_scale: float = 1e-6):
        if not step_scale > 0:
            raise ValueError("step_scale must be positive")
        self.step_scale = step_scale

    def directional(self, u, X, E, x0):
        h = self.step_scale * np.linalg.norm(X - x0, axis=1)
        plus, ok1 = u.evaluate_many(X + h[:, None] * E, strict=False)
        minus, ok2 = u.evaluate_many(X - h[:, None] * E, strict=False)
        out = (plus - minus) / (2 * h)[:, None]
        out[~(ok1 & ok2)] = np.nan
        return out


class IntegrabilityVerdict(str, enum.Enum):
    CONVERGENT = "convergent"
    DIVERGENT = "divergent"
    INCONCLUSIVE = "inconclusive"


@dataclass
class IntegrabilityReport:
    shells: list  # (r_inner, partial integral over r_inner < |x - x0| < rho)
    verdict: IntegrabilityVerdict
    estimate: float | None
    increments: list

    def to_dict(self):
        return {"shells": [[float(r), float(v)] for r, v in self.shells],
                "verdict": self.verdict.value, "estimate": self.estimate}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def sphere_area(n):
    """Surface measure of the unit sphere in R^n."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def shell_radii(rho, n_shells):
    k = np.arange(n_shells)
    return rho * 10.0 ** (-DECADES * k / (n_shells - 1))


def _directions(dim, n_angular, seed):
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim in (2, 3):
        return direction_grid(dim, n_angular)
    g = np.random.default_rng(seed).standard_normal((n_angular, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _decide(increments, totals):
    inc = np.asarray(increments[-TAIL:])
    run = np.asarray(totals[-TAIL:])
    if len(inc) < TAIL:
        return IntegrabilityVerdict.INCONCLUSIVE
    floor = NOISE_FLOOR * (1 + run)
    small = np.all(inc <= 1e-6 * (1 + run))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = inc[1:] / inc[:-1]
    pair_above = np.maximum(inc[1:], inc[:-1]) > floor[1:]
    shrinking = np.all((ratios <= 1) | ~pair_above)
    if small and shrinking:
        return IntegrabilityVerdict.CONVERGENT
    if np.all(inc[1:] >= inc[:-1]) and np.all(ratios >= 1.05):
        return IntegrabilityVerdict.DIVERGENT
    return IntegrabilityVerdict.INCONCLUSIVE


def check_integrability(u: VectorFieldDef, grad, x0, rho: float = 1.0, n_shells: int = 33,
                        n_angular: int = 128, seed: int = 0, workers: int = 1):
    """Shell-by-shell quadrature of the integrand toward ``x0``.

    >>> from selfcont.field import parse_field_expr
    >>> rep = check_integrability(parse_field_expr("dim 2; f = (x1, x2)"),
    ...                           FiniteDifferenceGradient(), [0, 0])
    >>> rep.verdict.value, round(rep.estimate, 6)
    ('convergent', 6.283185)
    """
    x0 = np.asarray(x0, float)
    dim = u.dim
    if x0.shape != (dim,):
        raise ValueError(f"x0 must have {dim} components")
    if not rho > 0:
        raise ValueError("rho must be positive")
    if n_shells < TAIL + 2:
        raise ValueError(f"need at least {TAIL + 2} shells")
    if isinstance(grad, AnalyticGradient) and grad.dim != dim:
        raise ValueError("gradient dimension differs from the field")
    radii = shell_radii(rho, n_shells)
    E = _directions(dim, n_angular, seed)
    w_ang = (2.0 if dim == 1 else sphere_area(dim)) / len(E)
    frac = (np.arange(RADIAL_POINTS) + 0.5) / RADIAL_POINTS

    def annulus(k):
        r_out, r_in = radii[k], radii[k + 1]
        rs = r_in + frac * (r_out - r_in)
        R = np.repeat(rs, len(E))
        D = np.tile(E, (RADIAL_POINTS, 1))
        X = x0 + R[:, None] * D
        G = grad.directional(u, X, D, x0)
        if not np.all(np.isfinite(G)):
            bad = X[~np.all(np.isfinite(G), axis=1)][0]
            raise FieldEvaluationError(f"gradient undefined on the shell r in [{r_in}, {r_out}]",
                                       bad)
        vals = np.linalg.norm(G, axis=1)
        return math.fsum(vals) * w_ang * (r_out - r_in) / RADIAL_POINTS

    ks = range(n_shells - 1)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            increments = list(ex.map(annulus, ks))
    else:
        increments = [annulus(k) for k in ks]
    totals = np.cumsum(increments).tolist()
    shells = list(zip(radii[1:].tolist(), totals))
    verdict = _decide(increments, totals)
    return IntegrabilityReport(shells, verdict, totals[-1], increments)
