import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from selfcont.field import (DomainSpec, GermCurveDef, GrowthBound, PointOutsideDomain,
                            PointUndefined, check_growth_sample, evaluate, parse_field_expr,
                            parse_germ, parse_gradient, serialize_field)

RADIAL = "dim 2; on norm(x1, x2) == 0 => (1, 0); f = (x1 / norm(x1, x2), x2 / norm(x1, x2))"


def test_override_wins_at_origin():
    f = parse_field_expr(RADIAL)
    np.testing.assert_array_equal(evaluate(f, [0, 0]), [1.0, 0.0])
    np.testing.assert_allclose(evaluate(f, [3, 4]), [0.6, 0.8], rtol=1e-15)


def test_serialization_is_canonical_and_stable():
    f = parse_field_expr("dim 2;on norm(x1,x2)==0=>(1,0);f=(x1/norm(x1,x2),x2/norm(x1,x2))")
    assert serialize_field(f) == RADIAL
    assert serialize_field(parse_field_expr(serialize_field(f))) == RADIAL


def test_first_override_wins():
    f = parse_field_expr("dim 1; on x1 >= 0 => (1); on x1 >= -1 => (2); f = (3)")
    np.testing.assert_array_equal(f.evaluate_many(np.array([[0.5], [-0.5], [-2.0]]))[:, 0],
                                  [1, 2, 3])


def test_undefined_points():
    f = parse_field_expr("dim 2; f = (x1 / norm(x1, x2), 1)")
    with pytest.raises(PointUndefined) as info:
        evaluate(f, [0, 0])
    assert "0" in str(info.value)
    vals, ok = f.evaluate_many(np.array([[0.0, 0.0], [1.0, 0.0]]), strict=False)
    assert ok.tolist() == [False, True]
    assert np.isnan(vals[0]).all()


def test_removed_override_becomes_undefined():
    f = parse_field_expr(RADIAL).without_override(0)
    with pytest.raises(PointUndefined):
        evaluate(f, [0, 0])


def test_domain_is_open():
    f = parse_field_expr("dim 1; f = (1)", DomainSpec.box([0.0], [1.0]))
    with pytest.raises(PointOutsideDomain):
        evaluate(f, [1.0])
    assert evaluate(f, [0.5])[0] == 1.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2))
def test_ray_germ_positions(direction):
    g = GermCurveDef.ray([0, 0], direction)
    eps = np.array([0.0, 0.25, 1.0])
    pos = g.position_at(eps, [1.0, -1.0])
    np.testing.assert_allclose(pos, np.array([1.0, -1.0]) + eps[:, None] * direction,
                               rtol=1e-14, atol=1e-14)
    np.testing.assert_array_equal(g.velocity_at(eps, [1.0, -1.0]),
                                  np.tile(direction, (3, 1)))


def test_germ_file_and_fd_velocity():
    g = parse_germ("dim 2; eps_max 0.5; phi = (x1 + sin(eps), x2 + eps * eps); "
                   "dphi = (cos(eps), 2 * eps)")
    assert g.eps_max == 0.5
    eps = np.array([0.1, 0.2])
    np.testing.assert_allclose(g.velocity_at(eps, [0, 0], fd=True),
                               g.velocity_at(eps, [0, 0]), rtol=1e-7)


def test_gradient_file():
    rows = parse_gradient("dim 2; grad = ((1, 0), (0, x1))")
    assert len(rows) == 2 and all(len(r) == 2 for r in rows)


@pytest.mark.parametrize("text, bound, ok", [
    ("dim 2; f = (x2, -x1)", GrowthBound(1.0, 1e-12), True),
    ("dim 2; f = (2 * x2, -x1)", GrowthBound(1.0, 1.0), False),
    ("dim 2; f = (sign(x1), 1)", GrowthBound(0.0, 2 ** 0.5), True),
])
def test_growth_sampling(text, bound, ok):
    rep = check_growth_sample(parse_field_expr(text), bound, 2000, 10.0, seed=1)
    assert rep.passed() is ok
    assert rep.n_evaluated == 2000
