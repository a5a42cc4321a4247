import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evacflow.field import FieldSampler, build_routing_field, extend_outside, regularized_normalize
from evacflow.library import BUILTINS, builtin
from evacflow.verification import solved

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
vec = st.tuples(finite, finite).map(np.array)
thetas = st.floats(1e-3, 10.0)
# zero or a magnitude whose square does not underflow
moderate = st.one_of(
    st.just(0.0),
    st.floats(1e-100, 1e3),
    st.floats(1e-100, 1e3).map(lambda v: -v),
)


def test_examples():
    assert regularized_normalize(np.array([0.0, 0.0]), 1.0).tolist() == [0.0, 0.0]
    assert regularized_normalize(np.array([1.0, 0.0]), 1.0)[0] == pytest.approx(0.7071068, abs=1e-7)
    n = regularized_normalize(np.array([3.0, 4.0]), 2.0)
    assert np.linalg.norm(n) == pytest.approx(5 / math.sqrt(29), abs=1e-7)


@settings(max_examples=500, deadline=None)
@given(vec, vec, thetas)
def test_lipschitz(a, b, theta):
    lhs = np.linalg.norm(regularized_normalize(a, theta) - regularized_normalize(b, theta))
    assert lhs <= np.linalg.norm(a - b) / theta * (1 + 1e-12) + 1e-300


@settings(max_examples=500, deadline=None)
@given(st.tuples(moderate, moderate).map(np.array), thetas)
def test_norm_below_one_and_alignment(x, theta):
    n = regularized_normalize(x, theta)
    assert np.linalg.norm(n) < 1.0
    dot = float(n @ x)
    assert dot >= 0.0
    assert (dot == 0.0) == (not np.any(x))


@settings(max_examples=300, deadline=None)
@given(vec, thetas)
def test_commutes_with_quarter_turns(x, theta):
    r = np.array([[0.0, -1.0], [1.0, 0.0]])
    assert np.array_equal(regularized_normalize(r @ x, theta), r @ regularized_normalize(x, theta))


def test_norm_tends_to_one():
    big = regularized_normalize(np.array([1e8, 0.0]), 0.1)
    assert 1 - np.linalg.norm(big) < 1e-15


def test_vectorized_matches_scalar(rng):
    x = rng.normal(size=(50, 2))
    out = regularized_normalize(x, 0.3)
    for k in range(50):
        assert np.array_equal(out[k], regularized_normalize(x[k], 0.3))


def test_strip_field(strip256):
    g, sol, f = strip256
    x, _ = g.centers
    k = int(np.argmin(np.abs(x[0] - 0.75)))
    xc = x[0, k]
    t = math.tanh(xc / 0.5)
    assert f.w[5, k, 0] == pytest.approx(t / math.sqrt(0.01 + t * t), abs=1e-2)
    assert f.w[5, 191, 0] == pytest.approx(0.99394, abs=1e-2)
    assert np.max(np.abs(f.w[..., 1])) <= 1e-6


@pytest.mark.parametrize("name", BUILTINS)
def test_field_bounds_and_exit_direction(name):
    g, sol, f = solved(builtin(name))
    norms = np.linalg.norm(f.w, axis=-1)
    assert np.all(norms < 1.0)
    assert np.all(norms[~g.inside] == 0.0)
    assert np.all(f.exit_wn > 0)
    # w vanishes exactly where grad phi does
    zero_grad = np.all(sol.grad_phi == 0.0, axis=-1) & g.inside
    assert np.array_equal(zero_grad, np.all(f.w == 0.0, axis=-1) & g.inside)


def test_wall_normal_component_shrinks_with_h():
    worst = []
    for n in (16, 32, 64):
        _, _, f = solved(builtin("square_room", n))
        worst.append(np.max(np.abs(f.wall_wn)))
    assert worst[2] < worst[1] < worst[0]


def test_theta_controls_norm(strip64):
    g, sol, _ = strip64
    small = build_routing_field(sol, 0.01, g)
    large = build_routing_field(sol, 1.0, g)
    assert small.max_norm > large.max_norm


def test_extension_and_sampler(square32):
    g, _, f = square32
    ext = extend_outside(f.w, g)
    assert ext.shape == (g.ny + 2, g.nx + 2, 2)
    s = FieldSampler(f.w, g)
    i, j = 5, 7
    assert np.array_equal(s((i + 0.5) * g.hx, (j + 0.5) * g.hy), f.w[j, i])
    mid = s((i + 1.0) * g.hx, (j + 0.5) * g.hy)
    assert np.allclose(mid, 0.5 * (f.w[j, i] + f.w[j, i + 1]), rtol=0, atol=1e-15)
