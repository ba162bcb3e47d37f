import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from selfcont.field import GermCurveDef, evaluate, parse_field_expr
from selfcont.probe import (ExtensionCandidate, NoExtensionFound, ProbeSchedule, Verdict,
                            decide_verdict, fit_germ_direction, probe_germ, probe_grid, probe_ray)
from selfcont.zoo import instantiate

SCHED = ProbeSchedule()


def test_rot_unit_residuals_are_sqrt2():
    rep = probe_ray(instantiate("rot-unit", v=(1, 0)).field, [0, 0])
    assert rep.verdict is Verdict.NOT_SELF_CONTINUOUS
    assert len(rep.residuals) == SCHED.count
    assert all(abs(d - math.sqrt(2)) <= 1e-12 for _, d in rep.residuals)


def test_radial_unit_residuals_vanish_exactly():
    rep = probe_ray(instantiate("radial-unit", n=(1, 0)).field, [0, 0])
    assert rep.verdict is Verdict.SELF_CONTINUOUS
    assert all(d == 0.0 for _, d in rep.residuals)


class CountingField:
    """Wraps a field and records every point it is asked about."""

    def __init__(self, field):
        self.field = field
        self.dim = field.dim
        self.points = []

    def evaluate_many(self, X, strict=True):
        self.points.extend(np.atleast_2d(X).tolist())
        return self.field.evaluate_many(X, strict)


def test_zero_value_is_trivial_and_never_samples_elsewhere():
    wrapped = CountingField(parse_field_expr("dim 2; f = (0, 0)"))
    rep = probe_ray(wrapped, [0.3, -2.0])
    assert rep.verdict is Verdict.TRIVIALLY_SELF_CONTINUOUS
    assert rep.residuals == []
    assert all(p == [0.3, -2.0] for p in wrapped.points)


def test_continuous_field():
    rep = probe_ray(parse_field_expr("dim 2; f = (x2, -x1)"), [1, 0])
    assert rep.verdict is Verdict.SELF_CONTINUOUS


def test_residuals_listed_with_decreasing_eps():
    rep = probe_ray(instantiate("converge-axis").field, [0.5, 0.0])
    eps = [e for e, _ in rep.residuals]
    assert all(a > b for a, b in zip(eps, eps[1:]))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=4, max_size=40))
def test_verdict_rule(d):
    v = decide_verdict(d, SCHED)
    tail = d[-SCHED.tail_length:]
    assert v == decide_verdict(list(d), SCHED)  # pure function of the residuals
    if max(tail) <= SCHED.tol:
        assert v is Verdict.SELF_CONTINUOUS
    elif min(tail) >= SCHED.stall_threshold and max(tail) - min(tail) <= 0.1 * min(tail):
        assert v is Verdict.NOT_SELF_CONTINUOUS
    else:
        assert v is Verdict.INCONCLUSIVE


@pytest.mark.parametrize("kw", [dict(eps0=0), dict(ratio=1.0), dict(count=3), dict(tol=-1),
                                dict(eps0=1e-300, count=100)])
def test_schedule_validation(kw):
    with pytest.raises(ValueError):
        ProbeSchedule(**kw)


def test_domain_exit_shrinks_eps0():
    # defined only for x1 < 0.5 + 1e-6: the first samples from 0.5 leave the domain
    f = parse_field_expr("dim 2; on x1 > 0.500001 => (0, 0); f = (1, 0)")
    from selfcont.field import DomainSpec
    from selfcont.expr import parse_predicate
    g = parse_field_expr("dim 2; f = (1, 0)",
                         DomainSpec(excluded=parse_predicate("x1 >= 0.500001", 2)))
    rep = probe_ray(g, [0.5, 0.0])
    assert rep.verdict is Verdict.SELF_CONTINUOUS
    assert "skipped" in rep.diagnostics
    assert f.dim == 2


def test_no_admissible_eps_is_inconclusive():
    from selfcont.field import DomainSpec
    from selfcont.expr import parse_predicate
    g = parse_field_expr("dim 1; f = (1)", DomainSpec(excluded=parse_predicate("x1 > 0", 1)))
    rep = probe_ray(g, [0.0])
    assert rep.verdict is Verdict.INCONCLUSIVE
    assert "no admissible" in rep.diagnostics


@pytest.mark.parametrize("seed", range(12))
def test_ray_germ_agrees_with_ray_probe(seed):
    rng = np.random.default_rng(seed)
    name = ["converge-axis", "rot-unit", "spiral-sin", "cross-axis"][seed % 4]
    field = instantiate(name).field
    x = rng.uniform(-2, 2, 2)
    fx = evaluate(field, x)
    a = probe_ray(field, x)
    b = probe_germ(field, GermCurveDef.ray(x, fx), x)
    assert a.verdict == b.verdict
    np.testing.assert_array_equal([d for _, d in a.residuals], [d for _, d in b.residuals])


def test_germ_on_converge_axis():
    field = instantiate("converge-axis").field
    germ = GermCurveDef.from_strings(["x1", "x2 + eps"], ["0", "1"])
    rep = probe_germ(field, germ, [0, 0])
    assert rep.verdict is Verdict.SELF_CONTINUOUS
    assert all(d == 0 for _, d in rep.residuals)


def test_tangent_circle_germ_on_rot_annulus():
    e = instantiate("rot-annulus")
    germ = GermCurveDef.from_strings(["cos(eps)", "-sin(eps)"], ["-sin(eps)", "-cos(eps)"])
    assert probe_germ(e.field, germ, [1, 0]).verdict is Verdict.SELF_CONTINUOUS


def test_germ_base_mismatch_rejected():
    field = instantiate("converge-axis").field
    with pytest.raises(ValueError, match="start"):
        probe_germ(field, GermCurveDef.from_strings(["x1 + 1", "x2"], ["0", "1"]), [0, 0])
    with pytest.raises(ValueError, match="velocity"):
        probe_germ(field, GermCurveDef.from_strings(["x1", "x2 + eps"], ["1", "1"]), [0, 0])


def test_germ_fd_fallback():
    field = instantiate("converge-axis").field
    germ = GermCurveDef.from_strings(["x1", "x2 + eps"], None)
    with pytest.raises(ValueError):
        probe_germ(field, germ, [0, 0])
    assert probe_germ(field, germ, [0, 0], fd=True).verdict is Verdict.SELF_CONTINUOUS


def test_report_json():
    rep = probe_ray(instantiate("rot-unit").field, [0, 0])
    d = json.loads(rep.to_json())
    assert set(d) == {"point", "residuals", "verdict", "limit_estimate", "diagnostics"}
    assert d["verdict"] == "NotSelfContinuous"


def test_extension_radial_unit():
    f = instantiate("radial-unit").field.without_override(0)
    c = fit_germ_direction(f, [0, 0])
    assert isinstance(c, ExtensionCandidate)
    assert c.speed == 1.0 and c.tail_residual == 0.0
    np.testing.assert_array_equal(c.direction, [1.0, 0.0])  # first grid direction


def test_extension_rot_unit_equilibrium():
    f = instantiate("rot-unit").field.without_override(0)
    assert isinstance(fit_germ_direction(f, [0, 0]), NoExtensionFound)
    c = fit_germ_direction(f, [0, 0], allow_equilibrium=True)
    assert c.equilibrium and c.speed == 0.0


def test_extension_converge_axis_none():
    f = instantiate("converge-axis").field.without_override(0)
    assert isinstance(fit_germ_direction(f, [0, 0]), NoExtensionFound)


def test_extension_3d_axis_none():
    # without the axis value the axis itself is undefined, and off-axis rays rotate
    f = instantiate("rot3d-axis").field.without_override(0)
    assert isinstance(fit_germ_direction(f, [0, 0, 0]), NoExtensionFound)


def test_extension_is_deterministic():
    f = instantiate("radial-unit").field.without_override(0)
    a, b = fit_germ_direction(f, [0, 0]), fit_germ_direction(f, [0, 0])
    assert a.to_dict() == b.to_dict()


def test_grid_rot_unit():
    rows = probe_grid(instantiate("rot-unit").field, [-1, -1], [1, 1], [5, 5])
    bad = [tuple(p) for p, v in rows if v is Verdict.NOT_SELF_CONTINUOUS]
    assert bad == [(0.0, 0.0)]
    assert sum(v is Verdict.SELF_CONTINUOUS for _, v in rows) == 24


def test_grid_converge_axis_all_self_continuous():
    rows = probe_grid(instantiate("converge-axis").field, [-1, -1], [1, 1], [5, 3], workers=3)
    assert all(v is Verdict.SELF_CONTINUOUS for _, v in rows)
    serial = probe_grid(instantiate("converge-axis").field, [-1, -1], [1, 1], [5, 3])
    assert [(tuple(p), v) for p, v in serial] == [(tuple(p), v) for p, v in rows]


def test_grid_reports_undefined_nodes():
    rows = probe_grid(instantiate("power-radial", N=2).field, [-1, -1], [1, 1], [3, 3])
    assert dict((tuple(p), v) for p, v in rows)[(0.0, 0.0)] is Verdict.UNDEFINED
