import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xfmnet.numerics import Tensor, check_gradients
from xfmnet.prediction import ForecastHead, mae, mse, predict


def test_metric_hand_example():
    assert mse([1.0, 2.0], [0.0, 4.0]) == 2.5
    assert mae([1.0, 2.0], [0.0, 4.0]) == 1.5


def test_constant_error():
    y = np.random.default_rng(0).standard_normal((6, 192))
    assert mse(y + 2, y) == pytest.approx(4.0)
    assert mae(y + 2, y) == pytest.approx(2.0)
    assert mse(y, y) == 0 and mae(y, y) == 0


def test_metric_errors():
    with pytest.raises(ValueError):
        mse(np.zeros(0), np.zeros(0))
    with pytest.raises(ValueError):
        mae(np.zeros(3), np.zeros(4))


@settings(max_examples=60, deadline=None)
@given(
    # magnitudes stay far from underflow so that squaring cannot round to zero
    err=st.lists(st.one_of(st.just(0.0), st.floats(1e-6, 5), st.floats(-5, -1e-6)), min_size=1, max_size=12),
    i=st.integers(0, 11),
    shrink=st.floats(0.05, 0.95),
)
def test_metrics_decrease_when_one_error_shrinks(err, i, shrink):
    e = np.array(err)
    i %= len(e)
    if e[i] == 0:
        return
    smaller = e.copy()
    smaller[i] *= shrink
    target = np.zeros_like(e)
    assert mse(smaller, target) < mse(e, target)
    assert mae(smaller, target) < mae(e, target)
    assert (mse(e, target) == 0) == (mae(e, target) == 0) == (not e.any())


def test_head_shape_contract(rng):
    lengths = [336, 168, 84, 42]
    heads = [ForecastHead(rng, T, 192, 16, 6) for T in lengths]
    z = [Tensor(rng.standard_normal((2, T, 16)).astype(np.float32)) for T in lengths]
    assert predict(z, heads).shape == (2, 6, 192)
    assert heads[0](z[0][0]).shape == (6, 192)


def test_zero_heads_predict_zero(rng):
    heads = [ForecastHead(rng, T, 5, 4, 3).zero_() for T in (8, 4)]
    z = [Tensor(rng.standard_normal((T, 4))) for T in (8, 4)]
    np.testing.assert_array_equal(predict(z, heads).data, 0)


def test_identical_levels_average_to_themselves(rng):
    head = ForecastHead(rng, 8, 5, 4, 3).astype(np.float64)
    z = Tensor(rng.standard_normal((8, 4)))
    v = head(z).data
    np.testing.assert_allclose(predict([z, z, z], [head, head, head]).data, v, atol=1e-12)


def test_head_matches_matrix_formula(rng):
    head = ForecastHead(rng, 8, 5, 4, 3).astype(np.float64)
    z = rng.standard_normal((8, 4))
    reg = z.T @ head.reg.weight.data + head.reg.bias.data  # (d, tau)
    expected = (reg.T @ head.proj.weight.data + head.proj.bias.data).T
    np.testing.assert_allclose(head(Tensor(z)).data, expected, atol=1e-12)


def test_missing_level_is_an_error(rng):
    heads = [ForecastHead(rng, T, 5, 4, 3) for T in (8, 4)]
    with pytest.raises(ValueError):
        predict([Tensor(np.zeros((8, 4)))], heads)


def test_head_gradients(rng):
    heads = [ForecastHead(rng, T, 5, 4, 3).astype(np.float64) for T in (8, 4)]
    z = [Tensor(rng.standard_normal((2, T, 4)), requires_grad=True) for T in (8, 4)]
    y = rng.standard_normal((2, 3, 5))
    params = {f"{i}.{n}": p for i, h in enumerate(heads) for n, p in h.named_parameters()}
    params.update({f"z{i}": t for i, t in enumerate(z)})
    errs = check_gradients(lambda: ((predict(z, heads) - y) ** 2).mean(), params)
    assert max(errs.values()) < 1e-3, errs
