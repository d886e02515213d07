import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from latentgeo import ndkernel as nk
from latentgeo.interp import (
    InterpolationError,
    InterpolationKind,
    get_interpolator,
    interpolate,
    lambda_from_times,
    lerp,
    norm_interp,
    slerp,
    slerp_norm,
)

KINDS = [k.value for k in InterpolationKind]
E1, E2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])

vectors = arrays(np.float64, 6, elements=st.floats(-10, 10, allow_nan=False))
weights = st.floats(0.0, 1.0)


def _non_degenerate(a, b):
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    return na > 1e-3 and nb > 1e-3 and np.dot(a, b) / (na * nb) > -0.999


def test_kind_names_are_lowercase_strings():
    assert KINDS == ["linear", "slerp", "norm", "slerp_norm"]
    assert str(InterpolationKind("slerp_norm")) == "slerp_norm"
    with pytest.raises(ValueError):
        InterpolationKind("cauchy")


def test_hand_examples():
    np.testing.assert_allclose(lerp(E1, E2, 0.5), [0.5, 0.5])
    h = math.sqrt(0.5)
    for f in (slerp, norm_interp, slerp_norm):
        np.testing.assert_allclose(f(E1, E2, 0.5), [h, h], atol=1e-15)
    z = np.array([0.3, -1.2, 2.0])
    np.testing.assert_allclose(norm_interp(z, z, 0.5), math.sqrt(2) * z)


@pytest.mark.parametrize("omega", [0.3, 1.0, 2.0, 3.0])
@pytest.mark.parametrize("lam", [0.0, 0.1, 0.37, 0.5, 0.9, 1.0])
def test_slerp_matches_rotation_oracle(omega, lam):
    r = 2.5
    z1 = r * np.array([1.0, 0.0, 0.0])
    z2 = r * np.array([math.cos(omega), math.sin(omega), 0.0])
    expected = r * np.array([math.cos(lam * omega), math.sin(lam * omega), 0.0])
    np.testing.assert_allclose(slerp(z1, z2, lam), expected, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(vectors, vectors, st.sampled_from(KINDS))
def test_endpoints_are_preserved(a, b, kind):
    assume(_non_degenerate(a, b))
    f = get_interpolator(kind)
    np.testing.assert_allclose(f(a, b, 0.0), a, atol=1e-9)
    np.testing.assert_allclose(f(a, b, 1.0), b, atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(vectors, vectors, weights)
def test_slerp_preserves_equal_norms(a, b, lam):
    assume(_non_degenerate(a, b))
    b = b / np.linalg.norm(b) * np.linalg.norm(a)
    out = slerp(a, b, lam)
    assert abs(np.linalg.norm(out) - np.linalg.norm(a)) < 1e-9 * max(1.0, np.linalg.norm(a))


@settings(max_examples=100, deadline=None)
@given(vectors, vectors, st.sampled_from(KINDS), weights)
def test_continuity_in_lambda(a, b, kind, lam):
    assume(_non_degenerate(a, b))
    step = 1e-3
    lam2 = min(1.0, lam + step)
    f = get_interpolator(kind)
    jump = np.linalg.norm(f(a, b, lam2) - f(a, b, lam))
    assert jump <= 10 * (np.linalg.norm(a) + np.linalg.norm(b)) * step + 1e-12


@settings(max_examples=100, deadline=None)
@given(vectors, vectors, weights)
def test_slerp_norm_weights_have_unit_square_sum(a, b, lam):
    # orthonormal endpoints make the output norm equal the weight vector norm
    assume(_non_degenerate(a, b))
    q, _ = np.linalg.qr(np.stack([a, b], axis=1))
    u, v = q[:, 0], q[:, 1]
    assume(abs(np.dot(u, v)) < 1e-9)
    assert abs(np.linalg.norm(slerp_norm(u, v, lam)) - 1.0) < 1e-9


@pytest.mark.parametrize("f", [slerp, slerp_norm])
def test_near_parallel_uses_limit(f):
    z = np.array([1.0, 2.0, 3.0])
    w = z * 2.0
    lim = lerp if f is slerp else norm_interp
    np.testing.assert_allclose(f(z, w, 0.3), lim(z, w, 0.3), atol=1e-12)
    tiny = z + np.array([1e-9, 0.0, 0.0])
    np.testing.assert_allclose(f(z, tiny, 0.6), lim(z, tiny, 0.6), atol=1e-8)


@pytest.mark.parametrize("f", [slerp, slerp_norm])
def test_spherical_errors(f):
    with pytest.raises(InterpolationError):
        f(E1, -E1, 0.5)
    with pytest.raises(InterpolationError):
        f(np.zeros(2), E1, 0.5)


@pytest.mark.parametrize("kind", KINDS)
def test_shape_and_weight_errors(kind):
    with pytest.raises(InterpolationError):
        interpolate(kind, np.ones(3), np.ones(4), 0.5)
    with pytest.raises(InterpolationError):
        interpolate(kind, np.ones(3), np.ones(3), 1.5)


@pytest.mark.parametrize("kind", KINDS)
def test_batched_rows_match_single_calls(kind):
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((2, 5, 4))
    lam = rng.uniform(0, 1, 5)
    out = interpolate(kind, a, b, lam)
    for i in range(5):
        np.testing.assert_allclose(out[i], interpolate(kind, a[i], b[i], lam[i]), atol=1e-14)


@pytest.mark.parametrize("kind", KINDS)
def test_tensor_path_matches_numpy_and_differentiates(kind):
    rng = np.random.default_rng(2)
    a = nk.Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    b = nk.Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    lam = np.array([0.2, 0.5, 0.8])
    f = get_interpolator(kind)
    np.testing.assert_allclose(f(a, b, lam).data, f(a.data, b.data, lam), atol=1e-14)
    w = rng.standard_normal((3, 4))
    loss = lambda: (f(a, b, lam) * w).sum()
    analytic = nk.grad(loss(), [a, b])
    numeric = nk.finite_difference_gradient(lambda: loss().item(), [a, b])
    assert nk.max_relative_error(analytic, numeric, floor=1e-3) < 1e-6


def test_tensor_path_is_finite_on_parallel_rows():
    a = nk.Tensor(np.array([[1.0, 2.0], [1.0, 0.0]]), requires_grad=True)
    b = np.array([[2.0, 4.0], [0.0, 1.0]])
    for f in (slerp, slerp_norm):
        (g,) = nk.grad(f(a, b, np.array([0.3, 0.3])).sum(), [a])
        assert np.all(np.isfinite(g))


def test_lambda_from_times():
    assert lambda_from_times(0, 5, 10) == 0.5
    assert lambda_from_times(30, 60, 90) == 0.5
    assert lambda_from_times(0, 1, 10) == pytest.approx(0.1)
    np.testing.assert_allclose(lambda_from_times([0, 0], [1, 3], [4, 4]), [0.25, 0.75])
    for bad in [(0, 0, 10), (0, 10, 10), (5, 1, 10), (10, 5, 0)]:
        with pytest.raises(ValueError):
            lambda_from_times(*bad)


def test_lambda_zero_limit_recovers_first_endpoint():
    z1, z3 = np.array([1.0, 2.0]), np.array([-3.0, 0.5])
    lam = lambda_from_times(0.0, 1e-9, 10.0)
    np.testing.assert_allclose(lerp(z1, z3, lam), z1, atol=1e-9)
