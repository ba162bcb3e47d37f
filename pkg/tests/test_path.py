import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import midpoint_error, rotation
from selfcont.field import GrowthBound, parse_field_expr
from selfcont.path import (Path, QuadratureSpec, apriori_bound_check, concat, error_functional,
                           eval_at, insert_node, linear_path, read_path_csv, rescale,
                           write_path_csv)

ROT = parse_field_expr("dim 2; f = (-x2, x1)")
CROSS = parse_field_expr("dim 2; on x1 == 0 => (1, 0); f = (0, sign(x1))")


def paths(dim=2, max_nodes=8):
    @st.composite
    def build(draw):
        n = draw(st.integers(2, max_nodes))
        steps = draw(st.lists(st.floats(0.01, 1.0), min_size=n - 1, max_size=n - 1))
        t = np.concatenate([[0.0], np.cumsum(steps)])
        X = np.array(draw(st.lists(st.lists(st.floats(-3, 3), min_size=dim, max_size=dim),
                                   min_size=n, max_size=n)))
        return Path(t, X)
    return build()


def test_rejects_bad_nodes():
    with pytest.raises(ValueError):
        Path([0, 0], [[0], [1]])
    with pytest.raises(ValueError):
        Path([0], [[0]])
    with pytest.raises(ValueError):
        Path([0, 1], [[0], [np.inf]])


@settings(max_examples=60, deadline=None)
@given(paths())
def test_midpoint_is_average(p):
    tm = 0.5 * (p.t[:-1] + p.t[1:])
    np.testing.assert_allclose(eval_at(p, tm), 0.5 * (p.x[:-1] + p.x[1:]), atol=1e-12)
    np.testing.assert_array_equal(eval_at(p, p.t), p.x)


@settings(max_examples=40, deadline=None)
@given(paths())
def test_error_matches_independent_midpoint_on_smooth_field(p):
    e = error_functional(ROT, p, QuadratureSpec(adaptive=False)).value
    assert e == pytest.approx(midpoint_error(rotation, p.t, p.x), rel=1e-12, abs=1e-14)


def test_cross_axis_horizontal_segment():
    e = error_functional(CROSS, linear_path([0, 0], [1, 0], 0, 1))
    assert abs(e.value - math.sqrt(2)) <= 1e-12


def test_adaptive_refines_segment_crossing_a_jump():
    p = linear_path([-1, 0], [1, 2], 0, 2)
    e = error_functional(CROSS, p)
    assert e.depth[0] > 0
    # exact value: velocity (1, 1); f = (0, -1) left of the axis, (0, 1) right
    exact = 1.0 * math.sqrt(1 + 4) + 1.0 * 1.0
    assert abs(e.value - exact) < 0.05


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(-2, 2), st.floats(-2, 2))
def test_node_insertion_keeps_error_when_integrand_is_affine(frac, a, b):
    # a constant field makes |x' - f| constant on each segment
    const = parse_field_expr("dim 2; f = (0.3, -0.7)")
    p = Path([0, 1, 2], [[0, 0], [a, b], [1, 1]])
    q = insert_node(p, frac * 2 if abs(frac * 2 - 1) > 1e-6 else 0.5)
    assert error_functional(const, q).value == pytest.approx(error_functional(const, p).value,
                                                             rel=1e-12)


def test_insert_existing_time_fails():
    with pytest.raises(ValueError):
        insert_node(linear_path([0], [1], 0, 1), 1.0)


@settings(max_examples=20, deadline=None)
@given(paths(max_nodes=5), st.floats(0.2, 5.0))
def test_rescale_identity(p, s):
    # E on the rescaled path equals int_0^r |x' - (s/r) f(x)| on the original one
    r = p.duration
    p0 = Path(p.t - p.t0, p.x)
    quad = QuadratureSpec(adaptive=False)
    lhs = error_functional(ROT, rescale(p0, s), quad).value
    rhs = midpoint_error(rotation, p0.t, p0.x, scale=s / r)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)
    scaled = error_functional(ROT, p0, quad, scale=s / r).value
    assert scaled == pytest.approx(lhs, rel=1e-9, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(paths(max_nodes=5))
def test_concat_adds_errors(p):
    q = Path(p.t + p.duration, p.x - p.x[0] + p.x[-1])
    joined = concat(p, q)
    total = error_functional(ROT, joined).value
    assert total == pytest.approx(error_functional(ROT, p).value + error_functional(ROT, q).value,
                                  rel=1e-12, abs=1e-14)


def test_concat_needs_matching_junction():
    with pytest.raises(ValueError):
        concat(linear_path([0], [1], 0, 1), linear_path([2], [3], 1, 2))


@settings(max_examples=40, deadline=None)
@given(paths())
def test_csv_round_trip_is_exact(p):
    buf = io.StringIO()
    write_path_csv(p, buf)
    buf.seek(0)
    assert read_path_csv(buf) == p


@settings(max_examples=40, deadline=None)
@given(paths(max_nodes=6))
def test_apriori_bound_holds_for_linear_growth_field(p):
    p0 = Path(p.t - p.t0, p.x)
    e = error_functional(ROT, p0).value
    holds, margin = apriori_bound_check(p0, GrowthBound(1.0, 1e-12), e)
    assert holds and margin >= 0
