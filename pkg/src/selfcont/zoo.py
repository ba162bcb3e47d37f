"""Catalog of example fields with analytic verdicts and reference trajectories.

Each entry is built from a few named parameters.  Verdicts are the outcomes
the ray probe must produce under the default schedule; where the ray test
cannot see self-continuity (curved invariant manifolds) a germ verdict is
stored instead.  References are piecewise-linear closed forms in ``t``; curved
integral curves are left out because a polyline cannot represent them with
zero residual.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .expr import compile_exprs, parse_expr, parse_predicate, to_source, variables_of
from .field import (DomainSpec, GermCurveDef, GrowthBound, VectorFieldDef, parse_field_expr,
                    serialize_field)
from .path import Path
from .probe import ProbeSchedule, Verdict, decide_verdict

__all__ = ["ZooEntry", "Reference", "GermVerdict", "ParamSpec", "list_entries", "instantiate",
           "entry_names", "export_entry", "UnknownEntryError", "ParameterError"]

REFERENCE_NODES = 512


class UnknownEntryError(KeyError):
    pass


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str  # vector | expr | real | int | choice
    default: object
    doc: str = ""
    choices: tuple = ()


@dataclass(frozen=True)
class Reference:
    """Closed-form path given piecewise by expressions in ``t``.

    ``pieces`` is a tuple of ``(t_start, t_end, exprs)``; consecutive pieces
    share their breakpoint.  ``generalized_only`` marks curves that are
    limits of integral curves but do not solve the equation pointwise; their
    exact error functional value is ``expected_e``.
    """

    x0: tuple
    pieces: tuple
    generalized_only: bool = False
    expected_e: float = 0.0
    note: str = ""

    @property
    def horizon(self):
        return self.pieces[-1][1]

    @property
    def breakpoints(self):
        return [p[0] for p in self.pieces[1:]]

    def _fns(self):
        return [(a, b, compile_exprs([parse_expr(s, 0, ("t",)) for s in exprs], ["t"]))
                for a, b, exprs in self.pieces]

    def positions(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.full((len(t), len(self.x0)), np.nan)
        done = np.zeros(len(t), bool)
        for a, b, fn in self._fns():
            m = ~done & (t >= a) & (t <= b)
            if m.any():
                vals = fn(t[m])
                out[m] = np.stack([np.broadcast_to(np.asarray(v, float), t[m].shape) for v in vals],
                                  axis=1)
                done |= m
        return out

    def discretize(self, n_nodes: int = REFERENCE_NODES) -> Path:
        """Polyline with ``n_nodes`` nodes: a uniform grid with every breakpoint swapped in."""
        T = self.horizon
        bps = [b for b in self.breakpoints if 0 < b < T]
        t = np.linspace(0.0, T, n_nodes)
        for b in bps:
            k = int(np.argmin(np.abs(t[1:-1] - b))) + 1
            t[k] = b
        t = np.sort(t)
        if len(np.unique(t)) != n_nodes:
            raise ValueError("breakpoints too close for the requested node count")
        return Path(t, self.positions(t))

    def to_dict(self):
        return {"x0": list(self.x0), "horizon": self.horizon,
                "pieces": [[a, b, list(e)] for a, b, e in self.pieces],
                "generalized_only": self.generalized_only, "expected_e": self.expected_e,
                "note": self.note}


@dataclass(frozen=True)
class GermVerdict:
    point: tuple
    germ: GermCurveDef
    verdict: Verdict

    def to_dict(self):
        g = self.germ
        return {"point": list(self.point), "position": [to_source(e) for e in g.position],
                "velocity": None if g.velocity is None else [to_source(e) for e in g.velocity],
                "verdict": self.verdict.value}


@dataclass
class ZooEntry:
    name: str
    field: VectorFieldDef
    params: dict
    verdicts: list  # (point tuple, Verdict)
    references: list = dc_field(default_factory=list)
    growth: GrowthBound | None = None
    notes: str = ""
    germ_verdicts: list = dc_field(default_factory=list)
    metadata: dict = dc_field(default_factory=dict)

    def to_metadata(self):
        return {
            "name": self.name,
            "params": {k: _jsonable(v) for k, v in self.params.items()},
            "verdicts": [[list(p), v.value] for p, v in self.verdicts],
            "germ_verdicts": [g.to_dict() for g in self.germ_verdicts],
            "references": [r.to_dict() for r in self.references],
            "growth": None if self.growth is None else {"c1": self.growth.c1, "c0": self.growth.c0},
            "notes": self.notes,
            "metadata": self.metadata,
        }


def _jsonable(v):
    if isinstance(v, tuple):
        return list(v)
    return v


# --------------------------------------------------------------------------
# helpers

def _constant_verdict(d: float) -> Verdict:
    """Verdict the default schedule assigns to a constant residual sequence."""
    sched = ProbeSchedule()
    return decide_verdict([d] * sched.count, sched)


def _num(x) -> str:
    return repr(float(x))


def _vec(v) -> str:
    return "(" + ", ".join(_num(c) for c in v) + ")"


def _norm_src(dim, upto=None):
    k = dim if upto is None else upto
    return "norm(" + ", ".join(f"x{i + 1}" for i in range(k)) + ")"


def _scalar_function(src: str, dim: int, var: str):
    """Parse a scalar function of one coordinate; returns (canonical text, constant or None)."""
    node = parse_expr(src, dim)
    extra = variables_of(node) - {var}
    if extra:
        raise ParameterError(f"g may only depend on {var}, found {sorted(extra)}")
    const = None
    if not variables_of(node):
        const = float(compile_exprs([node], [])()[0])
        if not math.isfinite(const):
            raise ParameterError("g must be finite")
    return to_source(node), const


def _axis_germ(dim, axis_index, speed):
    pos = [f"x{i + 1}" for i in range(dim)]
    vel = ["0"] * dim
    pos[axis_index] = f"x{axis_index + 1} + {_num(speed)} * eps"
    vel[axis_index] = _num(speed)
    return GermCurveDef.from_strings(pos, vel)


SQRT2 = math.sqrt(2.0)


# --------------------------------------------------------------------------
# entry builders; each takes the resolved parameter dict

def _intro_pair(p):
    axis = p["axis"]
    base = "f = (-1, sign(x1))"
    if axis is None:
        fld = parse_field_expr("dim 2; " + base,
                               DomainSpec(excluded=parse_predicate("x1 == 0", 2)))
    else:
        fld = parse_field_expr(f"dim 2; on x1 == 0 => {_vec(axis)}; " + base)
    verdicts = [((1.0, 0.0), Verdict.SELF_CONTINUOUS), ((-1.0, 2.0), Verdict.SELF_CONTINUOUS)]
    refs = [Reference((-1.0, 0.0), ((0.0, 1.0, ("-1 - t", "-t")),))]
    growth = GrowthBound(0.0, SQRT2)
    if axis is not None:
        a = np.asarray(axis, float)
        if a[0] == 0:
            d = 0.0  # the ray stays on the axis where f = a
        else:
            side = np.array([-1.0, 1.0 if a[0] > 0 else -1.0])
            d = float(np.linalg.norm(side - a))
        v = Verdict.TRIVIALLY_SELF_CONTINUOUS if not a.any() else _constant_verdict(d)
        verdicts += [((0.0, 0.0), v), ((0.0, 3.0), v)]
        growth = GrowthBound(0.0, max(SQRT2, float(np.linalg.norm(a))))
        if tuple(a) == (0.0, 1.0):
            refs.append(Reference((1.0, 0.0), ((0.0, 1.0, ("1 - t", "t")), (1.0, 2.0, ("0", "t"))),
                                  note="reaches the axis at t = 1, then climbs along it"))
    return dict(field=fld, verdicts=verdicts, references=refs, growth=growth,
                notes="Introductory field (-1, sign x1); generalized solutions start on x1 = 0 "
                      "whatever the axis value. Axis value (0, 1) makes it self-continuous.")


def _sliding_refs(c):
    """Closed-form solutions of (-sign x1, 1) with on-axis value (0, c)."""
    return [
        Reference((0.5, 0.0), ((0.0, 0.5, ("0.5 - t", "t")),
                               (0.5, 1.5, ("0", f"0.5 + {_num(c)} * (t - 0.5)"))),
                  note="enters the axis at t = 0.5 and slides"),
        Reference((-1.0, 0.0), ((0.0, 1.0, ("-1 + t", "t")),
                                (1.0, 2.0, ("0", f"1 + {_num(c)} * (t - 1)")))),
        Reference((0.0, 0.0), ((0.0, 1.0, ("0", f"{_num(c)} * t")),)),
    ]


def _converging(p, intro):
    g_src, c = _scalar_function(p["g"], 2, "x2")
    variant = p.get("variant", "axis")
    if variant == "printed":
        fld = parse_field_expr("dim 2; on x1 == 0 => (1, 0); f = (-sign(x1), 1)")
        axis_v = Verdict.NOT_SELF_CONTINUOUS  # f(eps, 0) = (-1, 1) against (1, 0): sqrt 5
        growth = GrowthBound(0.0, SQRT2)
    else:
        fld = parse_field_expr(f"dim 2; on x1 == 0 => (0, {g_src}); f = (-sign(x1), 1)")
        axis_v = None
        growth = GrowthBound(0.0, max(SQRT2, abs(c))) if c is not None else None
    verdicts = [((0.5, 0.0), Verdict.SELF_CONTINUOUS), ((-0.5, 1.0), Verdict.SELF_CONTINUOUS)]
    germs, refs = [], []
    if axis_v is not None:
        verdicts += [((0.0, 0.0), axis_v), ((0.0, 1.0), axis_v)]
    elif c is not None:
        v = Verdict.TRIVIALLY_SELF_CONTINUOUS if c == 0 else Verdict.SELF_CONTINUOUS
        verdicts += [((0.0, 0.0), v), ((0.0, 1.0), v)]
        germs.append(GermVerdict((0.0, 0.0), _axis_germ(2, 1, c), Verdict.SELF_CONTINUOUS))
        refs = _sliding_refs(c)
    if intro:
        notes = ("Introductory field (-sign x1, 1); solutions through x1 = 0 exist only with "
                 "an axis value (0, g(x2)).")
    else:
        notes = ("Converging field (-sign x1, 1): off-axis curves enter x1 = 0 and slide along "
                 "it. Variant 'printed' puts (1, 0) on the axis and is not self-continuous there.")
    return dict(field=fld, verdicts=verdicts, references=refs, growth=growth, notes=notes,
                germ_verdicts=germs)


def _radial_unit(p):
    n = np.asarray(p["n"], float)
    dim = len(n)
    if dim < 2:
        raise ParameterError("n must have at least 2 components")
    nrm = _norm_src(dim)
    comps = ", ".join(f"x{i + 1} / {nrm}" for i in range(dim))
    fld = parse_field_expr(f"dim {dim}; on {nrm} == 0 => {_vec(n)}; f = ({comps})")
    size = float(np.linalg.norm(n))
    v0 = Verdict.TRIVIALLY_SELF_CONTINUOUS if size == 0 else _constant_verdict(abs(size - 1.0))
    e1 = np.eye(dim)[0]
    pt = np.zeros(dim)
    pt[:2] = (3.0, 4.0)
    verdicts = [(tuple(np.zeros(dim)), v0), (tuple(e1), Verdict.SELF_CONTINUOUS),
                (tuple(pt), Verdict.SELF_CONTINUOUS)]
    refs = [Reference(tuple(e1), ((0.0, 1.0, tuple(["1 + t"] + ["0"] * (dim - 1))),)),
            Reference(tuple(pt), ((0.0, 1.0, tuple(f"{_num(c)} * (1 + t / 5)" for c in pt)),))]
    if size == 1.0:
        refs.append(Reference(tuple(np.zeros(dim)),
                              ((0.0, 1.0, tuple(f"{_num(c)} * t" for c in n)),),
                              note="integral curve from the origin along n"))
    return dict(field=fld, verdicts=verdicts, references=refs,
                growth=GrowthBound(0.0, max(1.0, size)),
                notes="Unit radial field x/|x| with f(0) = n; self-continuous iff n is a unit "
                      "vector or zero.")


def _rot_unit(p):
    v = np.asarray(p["v"], float)
    if v.shape != (2,):
        raise ParameterError("v must have 2 components")
    nrm = "norm(x1, x2)"
    fld = parse_field_expr(f"dim 2; on {nrm} == 0 => {_vec(v)}; f = (x2 / {nrm}, -x1 / {nrm})")
    if not v.any():
        v0 = Verdict.TRIVIALLY_SELF_CONTINUOUS
        refs = [Reference((0.0, 0.0), ((0.0, 1.0, ("0", "0")),), note="equilibrium")]
    else:
        # f(eps v) = Q v/|v| is orthogonal to v, so d = sqrt(1 + |v|^2) on every ray step
        v0 = _constant_verdict(math.sqrt(1.0 + float(v @ v)))
        refs = []
    verdicts = [((0.0, 0.0), v0), ((1.0, 0.0), Verdict.SELF_CONTINUOUS),
                ((0.0, 2.0), Verdict.SELF_CONTINUOUS), ((-0.3, 0.4), Verdict.SELF_CONTINUOUS)]
    return dict(field=fld, verdicts=verdicts, references=refs,
                growth=GrowthBound(0.0, max(1.0, float(np.linalg.norm(v)))),
                notes="Unit rotation Qx/|x| with f(0) = v; only v = 0 is self-continuous at 0.")


def _rot3d_axis(p):
    g_src, c = _scalar_function(p["g"], 3, "x3")
    h = "norm(x1, x2)"
    fld = parse_field_expr(f"dim 3; on {h} == 0 => (0, 0, {g_src}); "
                           f"f = (x2 / {h}, -x1 / {h}, x3 / {h})")
    verdicts = [((1.0, 0.0, 0.0), Verdict.SELF_CONTINUOUS),
                ((1.0, 0.0, 1.0), Verdict.SELF_CONTINUOUS)]
    refs = []
    if c is not None:
        v = Verdict.TRIVIALLY_SELF_CONTINUOUS if c == 0 else Verdict.SELF_CONTINUOUS
        verdicts += [((0.0, 0.0, 0.0), v), ((0.0, 0.0, 2.0), v)]
        refs = [Reference((0.0, 0.0, 0.0), ((0.0, 1.0, ("0", "0", f"{_num(c)} * t")),)),
                Reference((0.0, 0.0, 1.0), ((0.0, 1.0, ("0", "0", f"1 + {_num(c)} * t")),))]
    return dict(field=fld, verdicts=verdicts, references=refs, growth=None,
                notes="Three-dimensional rotation Qx/|x_hat| with axis value (0, 0, g(x3)); "
                      "curves starting on the axis stay there. |f| is unbounded near the axis.")


def _rot_annulus(p):
    r = "norm(x1, x2)"
    fld = parse_field_expr(f"dim 2; on {r} == 0 => (0, 0); on abs({r} - 1) < 1e-9 => (x2, -x1); "
                           f"f = (x2 / ({r} * ({r} - 1)), -x1 / ({r} * ({r} - 1)))")
    verdicts = [((0.0, 0.0), Verdict.TRIVIALLY_SELF_CONTINUOUS),
                ((2.0, 0.0), Verdict.SELF_CONTINUOUS), ((0.5, 0.0), Verdict.SELF_CONTINUOUS),
                ((0.0, -3.0), Verdict.SELF_CONTINUOUS)]
    circle = GermCurveDef.from_strings(
        ["x1 * cos(eps) + x2 * sin(eps)", "x2 * cos(eps) - x1 * sin(eps)"],
        ["x2 * cos(eps) - x1 * sin(eps)", "-x1 * cos(eps) - x2 * sin(eps)"])
    germs = [GermVerdict((1.0, 0.0), circle, Verdict.SELF_CONTINUOUS),
             GermVerdict((0.0, 1.0), circle, Verdict.SELF_CONTINUOUS)]
    refs = [Reference((0.0, 0.0), ((0.0, 1.0, ("0", "0")),), note="equilibrium")]
    return dict(field=fld, verdicts=verdicts, references=refs, growth=None, germ_verdicts=germs,
                notes="Rotation Qx/(|x|(|x|-1)) with the unit circle made invariant (value Qx) "
                      "and f(0) = 0. The ray test cannot see the circle's self-continuity; "
                      "the tangent-circle germ can.")


def _spiral_sin(p):
    f0 = np.asarray(p["f0"], float)
    if f0.shape != (2,):
        raise ParameterError("f0 must have 2 components")
    r = "norm(x1, x2)"
    fld = parse_field_expr(f"dim 2; on {r} == 0 => {_vec(f0)}; f = (sin(1 / {r}), cos(1 / {r}))")
    # for f0 != 0 the residuals oscillate along the ray and never settle: sampling is inconclusive
    v0 = Verdict.TRIVIALLY_SELF_CONTINUOUS if not f0.any() else Verdict.INCONCLUSIVE
    verdicts = [((0.0, 0.0), v0), ((1.0, 0.0), Verdict.SELF_CONTINUOUS),
                ((0.0, 0.3), Verdict.SELF_CONTINUOUS)]
    refs = [Reference((0.0, 0.0), ((0.0, 1.0, ("0", "0")),), note="equilibrium")] \
        if not f0.any() else []
    return dict(field=fld, verdicts=verdicts, references=refs,
                growth=GrowthBound(0.0, max(1.0, float(np.linalg.norm(f0)))),
                notes="Oscillating unit field (sin 1/|x|, cos 1/|x|); only f(0) = 0 is "
                      "self-continuous at the origin.")


def _diverge_axis(p):
    variant = p["variant"]
    refs = []
    if variant == "axis":
        g_src, c = _scalar_function(p["g"], 2, "x2")
        fld = parse_field_expr(f"dim 2; on x1 == 0 => (0, {g_src}); f = (sign(x1), 1)")
        growth = GrowthBound(0.0, max(SQRT2, abs(c))) if c is not None else None
        axis_v = None
        if c is not None:
            axis_v = Verdict.TRIVIALLY_SELF_CONTINUOUS if c == 0 else Verdict.SELF_CONTINUOUS
            refs.append(Reference((0.0, 0.0), ((0.0, 1.0, ("0", f"{_num(c)} * t")),),
                                  note="vertical solution"))
        refs += [Reference((0.0, 0.0), ((0.0, 1.0, ("t", "t")),), note="leaves to the right"),
                 Reference((0.0, 0.0), ((0.0, 1.0, ("-t", "t")),), note="leaves to the left")]
    elif variant == "right-closed":
        fld = parse_field_expr("dim 2; on x1 >= 0 => (1, 1); f = (-1, 1)")
        growth, axis_v = GrowthBound(0.0, SQRT2), Verdict.SELF_CONTINUOUS
        refs.append(Reference((0.0, 0.0), ((0.0, 1.0, ("t", "t")),)))
    elif variant == "left-closed":
        fld = parse_field_expr("dim 2; on x1 > 0 => (1, 1); f = (-1, 1)")
        growth, axis_v = GrowthBound(0.0, SQRT2), Verdict.SELF_CONTINUOUS
        refs.append(Reference((0.0, 0.0), ((0.0, 1.0, ("-t", "t")),)))
    else:  # pragma: no cover - guarded by the choice check
        raise ParameterError(variant)
    refs.append(Reference((1.0, 0.0), ((0.0, 1.0, ("1 + t", "t")),)))
    verdicts = [((1.0, 0.0), Verdict.SELF_CONTINUOUS), ((-1.0, 0.0), Verdict.SELF_CONTINUOUS)]
    if axis_v is not None:
        verdicts += [((0.0, 0.0), axis_v), ((0.0, -1.0), axis_v)]
    return dict(field=fld, verdicts=verdicts, references=refs, growth=growth,
                notes="Diverging field (sign x1, 1). With axis value (0, g) solutions from the "
                      "axis are not unique; the one-sided variants lose the vertical solution.")


def _cross_axis(p):
    fld = parse_field_expr("dim 2; on x1 == 0 => (1, 0); f = (0, sign(x1))")
    verdicts = [((0.0, 0.0), Verdict.NOT_SELF_CONTINUOUS),  # f(eps, 0) = (0, 1): sqrt 2
                ((0.0, 1.0), Verdict.NOT_SELF_CONTINUOUS),
                ((1.0, 0.0), Verdict.SELF_CONTINUOUS), ((-1.0, 2.0), Verdict.SELF_CONTINUOUS)]
    refs = [Reference((1.0, 0.0), ((0.0, 1.0, ("1", "t")),)),
            Reference((-1.0, 0.0), ((0.0, 1.0, ("-1", "-t")),)),
            Reference((0.0, 0.0), ((0.0, 1.0, ("t", "0")),), generalized_only=True,
                      expected_e=SQRT2,
                      note="horizontal curve (t, 0): pointwise residual |(1, -1)| = sqrt 2")]
    return dict(field=fld, verdicts=verdicts, references=refs, growth=GrowthBound(0.0, 1.0),
                notes="Crossing field (0, sign x1) with (1, 0) on the axis, as printed. The "
                      "claimed approximants (t, 1/j) are not integral curves of this field; see "
                      "cross-axis-swapped.")


def _cross_axis_swapped(p):
    fld = parse_field_expr("dim 2; f = (sign(x1), 0)")
    verdicts = [((0.0, 0.0), Verdict.TRIVIALLY_SELF_CONTINUOUS),
                ((0.0, 2.0), Verdict.TRIVIALLY_SELF_CONTINUOUS),
                ((1.0, 1.0), Verdict.SELF_CONTINUOUS), ((-1.0, 0.0), Verdict.SELF_CONTINUOUS)]
    refs = [Reference((0.0, 0.0), ((0.0, 1.0, ("t", "0")),)),
            Reference((0.0, 0.0), ((0.0, 1.0, ("-t", "0")),)),
            Reference((0.0, 0.5), ((0.0, 1.0, ("t", "0.5")),))]
    return dict(field=fld, verdicts=verdicts, references=refs, growth=GrowthBound(0.0, 1.0),
                notes="Swapped crossing field (sign x1, 0), under which (t, 1/j) are exact "
                      "integral curves converging to (t, 0). Axis points are equilibria.")


def _cross_axis_vertical(p):
    g_src, c = _scalar_function(p["g"], 2, "x2")
    fld = parse_field_expr(f"dim 2; on x1 == 0 => (0, {g_src}); f = (0, sign(x1))")
    verdicts = [((1.0, 0.0), Verdict.SELF_CONTINUOUS), ((-1.0, 0.0), Verdict.SELF_CONTINUOUS)]
    refs = [Reference((1.0, 0.0), ((0.0, 1.0, ("1", "t")),)),
            Reference((-1.0, 0.0), ((0.0, 1.0, ("-1", "-t")),))]
    growth = None
    if c is not None:
        v = Verdict.TRIVIALLY_SELF_CONTINUOUS if c == 0 else Verdict.SELF_CONTINUOUS
        verdicts += [((0.0, 0.0), v), ((0.0, 5.0), v)]
        refs.append(Reference((0.0, 0.0), ((0.0, 1.0, ("0", f"{_num(c)} * t")),),
                              note="vertical integral curve on the axis"))
        growth = GrowthBound(0.0, max(1.0, abs(c)))
    return dict(field=fld, verdicts=verdicts, references=refs, growth=growth,
                notes="Crossing field (0, sign x1) with axis value (0, g): self-continuous, "
                      "with a vertical integral curve on the axis.")


def _power_radial(p):
    alpha, n = float(p["alpha"]), int(p["N"])
    if n < 2:
        raise ParameterError("N must be at least 2")
    if not -n < alpha <= -1:
        raise ParameterError(f"alpha must lie in (-N, -1] = ({-n}, -1], got {alpha}")
    nrm = _norm_src(n)
    comps = ", ".join(f"pow({nrm}, {_num(alpha)}) * x{i + 1}" for i in range(n))
    fld = parse_field_expr(f"dim {n}; f = ({comps})")
    e1 = np.eye(n)[0]
    mid = np.zeros(n)
    mid[:2] = 0.5
    verdicts = [(tuple(map(float, e1)), Verdict.SELF_CONTINUOUS),
                (tuple(map(float, mid)), Verdict.SELF_CONTINUOUS)]
    refs = []
    if alpha == -1.0:
        refs.append(Reference(tuple(e1), ((0.0, 1.0, tuple(["1 + t"] + ["0"] * (n - 1))),)))
    rows = []
    for i in range(n):
        rows.append("(" + ", ".join(
            f"pow({nrm}, {_num(alpha)}) * ({_num(alpha)} * x{i + 1} * x{j + 1} / ({nrm} * {nrm})"
            + (" + 1)" if i == j else ")") for j in range(n)) + ")")
    grad = f"dim {n}; grad = ({', '.join(rows)})"
    return dict(field=fld, verdicts=verdicts, references=refs, growth=None,
                metadata={"sobolev_exponent_interval": "(-N/p, -1)", "gradient": grad,
                          "note": "p is bookkeeping only and never used in computation"},
                notes="Power field |x|^alpha x, undefined at the origin; unbounded near 0 for "
                      "alpha < -1.")


# --------------------------------------------------------------------------
# registry

_G = ParamSpec("g", "expr", "1", "axis speed g as an expression of the axis coordinate")

_REGISTRY = {
    "intro-pair": ("(-1, sign x1) with an optional axis value",
                   (ParamSpec("axis", "vector", (0.0, 1.0), "value on x1 = 0, or none"),),
                   _intro_pair),
    "diverge-intro": ("(-sign x1, 1) with axis value (0, g)", (_G,),
                      lambda p: _converging(p, intro=True)),
    "radial-unit": ("x/|x| with f(0) = n", (ParamSpec("n", "vector", (1.0, 0.0), "value at 0"),),
                    _radial_unit),
    "rot-unit": ("Qx/|x| with f(0) = v", (ParamSpec("v", "vector", (1.0, 0.0), "value at 0"),),
                 _rot_unit),
    "rot3d-axis": ("Qx/|x_hat| in 3-D with axis value (0, 0, g)",
                   (ParamSpec("g", "expr", "1", "axis speed as an expression of x3"),),
                   _rot3d_axis),
    "rot-annulus": ("Qx/(|x|(|x|-1)) with invariant unit circle", (), _rot_annulus),
    "spiral-sin": ("(sin 1/|x|, cos 1/|x|) with f(0) = f0",
                   (ParamSpec("f0", "vector", (0.0, 0.0), "value at 0"),), _spiral_sin),
    "converge-axis": ("(-sign x1, 1) sliding onto the axis",
                      (_G, ParamSpec("variant", "choice", "axis", "axis value (0, g) or (1, 0)",
                                     ("axis", "printed"))),
                      lambda p: _converging(p, intro=False)),
    "diverge-axis": ("(sign x1, 1) and its one-sided variants",
                     (_G, ParamSpec("variant", "choice", "axis", "axis value or closed side",
                                    ("axis", "right-closed", "left-closed"))),
                     _diverge_axis),
    "cross-axis": ("(0, sign x1) with (1, 0) on the axis, as printed", (), _cross_axis),
    "cross-axis-swapped": ("(sign x1, 0)", (), _cross_axis_swapped),
    "cross-axis-vertical": ("(0, sign x1) with axis value (0, g)", (_G,), _cross_axis_vertical),
    "power-radial": ("|x|^alpha x in N dimensions",
                     (ParamSpec("alpha", "real", -1.5, "exponent in (-N, -1]"),
                      ParamSpec("N", "int", 3, "dimension")),
                     _power_radial),
}


def entry_names():
    return list(_REGISTRY)


def list_entries():
    """All entries as (name, summary), in catalog order."""
    return [(name, spec[0]) for name, spec in _REGISTRY.items()]


def _coerce(spec: ParamSpec, value):
    if spec.kind == "vector":
        if value is None or (isinstance(value, str) and value.strip().lower() == "none"):
            return None
        if isinstance(value, str):
            value = [float(s) for s in value.split(",")]
        vec = tuple(float(c) for c in value)
        if not all(math.isfinite(c) for c in vec):
            raise ParameterError(f"{spec.name} must be finite")
        return vec
    if spec.kind == "real":
        v = float(value)
        if not math.isfinite(v):
            raise ParameterError(f"{spec.name} must be finite")
        return v
    if spec.kind == "int":
        if isinstance(value, float) and not value.is_integer():
            raise ParameterError(f"{spec.name} must be an integer")
        return int(value)
    if spec.kind == "choice":
        if value not in spec.choices:
            raise ParameterError(f"{spec.name} must be one of {', '.join(spec.choices)}")
        return value
    return str(value)  # expr: validated by the builder


def instantiate(name: str, **params) -> ZooEntry:
    """Build a concrete entry.

    >>> instantiate("rot-unit", v=(0, 0)).verdicts[0][1].value
    'TriviallySelfContinuous'
    """
    try:
        summary, specs, builder = _REGISTRY[name]
    except KeyError:
        raise UnknownEntryError(f"unknown zoo entry {name!r}") from None
    known = {s.name: s for s in specs}
    unknown = set(params) - set(known)
    if unknown:
        raise ParameterError(f"{name} has no parameter(s) {sorted(unknown)}")
    resolved = {}
    for s in specs:
        resolved[s.name] = _coerce(s, params.get(s.name, s.default))
    if name != "intro-pair" and any(v is None for v in resolved.values()):
        raise ParameterError("only intro-pair accepts an absent vector parameter")
    try:
        parts = builder(resolved)
    except ParameterError:
        raise
    except ValueError as exc:  # expression errors in g
        raise ParameterError(f"bad parameter for {name}: {exc}") from exc
    return ZooEntry(name=name, params=resolved, **parts)


def export_entry(entry: ZooEntry):
    """Field file text in the expression grammar and the JSON metadata sidecar."""
    return serialize_field(entry.field), json.dumps(entry.to_metadata(), indent=2)
