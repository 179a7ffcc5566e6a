import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hagnn import autodiff as ad
from hagnn.autodiff import ShapeError, Tensor

from oracles import central_difference, max_relative_error

RNG = np.random.default_rng(0)


def check(build, *shapes, positive=False, tol=1e-6):
    """Compare analytic and central-difference gradients of sum(w * build(*params))."""
    params = [ad.parameter(np.abs(RNG.standard_normal(s)) + 0.5 if positive else RNG.standard_normal(s)) for s in shapes]
    out = build(*params)
    weights = RNG.standard_normal(out.shape)

    def f():
        return float((build(*[Tensor(p.data) for p in params]).data * weights).sum())

    loss = ad.sum(ad.mul(out, Tensor(weights)))
    analytic = ad.grad(loss, params)
    numeric = central_difference(f, [p.data for p in params])
    for a, n in zip(analytic, numeric):
        assert max_relative_error(a, n, floor=1e-4) < tol


SEG = np.array([0, 0, 1, 3, 3, 3])


@pytest.mark.parametrize(
    "name,build,shapes,positive",
    [
        ("add", ad.add, [(3, 4), (3, 4)], False),
        ("add_bias", ad.add, [(3, 4), (4,)], False),
        ("sub", ad.sub, [(3, 4), (3, 4)], False),
        ("mul", ad.mul, [(3, 4), (3, 4)], False),
        ("scale", lambda a: ad.scale(a, -2.5), [(3, 2)], False),
        ("matmul", ad.matmul, [(3, 4), (4, 2)], False),
        ("concat0", lambda a, b: ad.concat([a, b], 0), [(2, 3), (4, 3)], False),
        ("concat1", lambda a, b: ad.concat([a, b], 1), [(2, 3), (2, 1)], False),
        ("reshape", lambda a: ad.reshape(a, (6,)), [(2, 3)], False),
        ("transpose", ad.transpose, [(2, 3)], False),
        ("leaky_relu", lambda a: ad.leaky_relu(a, 0.05), [(4, 5)], False),
        ("relu", ad.relu, [(4, 5)], False),
        ("elu", ad.elu, [(4, 5)], False),
        ("sigmoid", ad.sigmoid, [(4, 5)], False),
        ("softplus", ad.softplus, [(4, 5)], False),
        ("exp", ad.exp, [(3, 3)], False),
        ("log", ad.log, [(3, 3)], True),
        ("softmax", lambda a: ad.softmax(a, 1), [(3, 5)], False),
        ("log_softmax", lambda a: ad.log_softmax(a, 1), [(3, 5)], False),
        ("sum_axis", lambda a: ad.sum(a, 0), [(3, 5)], False),
        ("mean", lambda a: ad.reshape(ad.mean(a), (1,)), [(3, 5)], False),
        ("gather", lambda a: ad.gather_rows(a, [2, 0, 2, 1]), [(3, 2)], False),
        ("segment_softmax", lambda a: ad.segment_softmax(a, SEG, 4), [(6,)], False),
        ("segment_weighted_sum", lambda m, w: ad.segment_weighted_sum(m, w, SEG, 4), [(6, 3), (6,)], False),
        ("scatter", lambda a: ad.scatter_rows(a, [3, 0], 5), [(2, 3)], False),
    ],
)
def test_op_gradients(name, build, shapes, positive):
    check(build, *shapes, positive=positive)


def test_shared_subexpression_accumulates():
    x = ad.parameter([1.0, 2.0, 3.0])
    y = ad.mul(x, x)
    loss = ad.sum(ad.add(y, y))
    (g,) = ad.grad(loss, [x])
    np.testing.assert_allclose(g, 4 * x.data)


def test_unused_parameter_gets_zero_grad():
    a, b = ad.parameter(np.ones(3)), ad.parameter(np.ones(2))
    ga, gb = ad.grad(ad.sum(a), [a, b])
    assert np.all(ga == 1) and np.all(gb == 0)


def test_non_scalar_backward_errors():
    with pytest.raises(ShapeError):
        ad.backward(ad.mul(ad.parameter(np.ones(3)), Tensor(np.ones(3))))


@pytest.mark.parametrize("op", [ad.add, ad.sub, ad.mul, ad.matmul])
def test_no_implicit_broadcasting(op):
    with pytest.raises(ShapeError, match="incompatible shapes"):
        op(Tensor(np.ones((3, 4))), Tensor(np.ones((2, 4))))


def test_segment_ids_must_be_sorted_and_in_range():
    v = Tensor(np.ones(3))
    with pytest.raises(ShapeError):
        ad.segment_softmax(v, [1, 0, 1], 2)
    with pytest.raises(ShapeError):
        ad.segment_softmax(v, [0, 1, 2], 2)
    with pytest.raises(ShapeError):
        ad.gather_rows(Tensor(np.ones((2, 2))), [2])


def test_softmax_stability_with_large_logits():
    out = ad.segment_softmax(Tensor(np.array([1000.0, 1001.0, -1000.0])), [0, 0, 1], 2).data
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out[:2].sum(), 1.0)
    assert out[2] == 1.0


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(0, 6), min_size=1, max_size=40), st.integers(0, 2**31 - 1), st.floats(1e-3, 50))
def test_segment_softmax_sums_to_one(raw_segments, seed, scale):
    seg = np.sort(np.asarray(raw_segments))
    x = np.random.default_rng(seed).standard_normal(len(seg)) * scale
    y = ad.segment_softmax(Tensor(x), seg, 7).data
    sums = np.bincount(seg, weights=y, minlength=7)
    present = np.bincount(seg, minlength=7) > 0
    assert np.all(np.abs(sums[present] - 1) <= 1e-9)
    assert np.all(sums[~present] == 0)


def test_operator_sugar():
    a = ad.parameter(np.ones((2, 2)))
    out = (a + np.ones((2, 2))) * 3.0 - a @ np.eye(2)
    np.testing.assert_allclose(out.data, 5.0)
    (g,) = ad.grad(ad.sum(-out), [a])
    np.testing.assert_allclose(g, -2.0)
