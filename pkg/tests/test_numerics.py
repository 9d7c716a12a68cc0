import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_dft, naive_xcorr
from xfmnet.numerics import (
    Adam,
    AdamState,
    GraphError,
    NonFiniteError,
    Tensor,
    adam_step,
    avg_pool1d,
    check_gradients,
    concat,
    conv1d,
    conv2d,
    conv_transpose1d,
    embedding,
    fft,
    freq_cross_correlate,
    ifft,
    leaky_relu,
    load_checkpoint,
    no_grad,
    pad,
    save_checkpoint,
    softmax,
    stack,
)


def t64(rng, *shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True)


# -- FFT ----------------------------------------------------------------------


def test_fft_delta_impulse():
    spec = fft([1.0, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(spec.re, 1.0)
    np.testing.assert_allclose(spec.im, 0.0)


def test_fft_constant_is_dc_only():
    spec = fft(np.full(8, 2.5))
    assert spec.re[0] == pytest.approx(20.0)
    assert np.abs(spec.to_complex()[1:]).max() < 1e-9


def test_fft_matches_naive_dft(rng):
    x = rng.standard_normal(12)
    assert np.abs(fft(x).to_complex() - naive_dft(x)).max() < 1e-6


def test_fft_empty_raises():
    with pytest.raises(ValueError):
        fft([])


@pytest.mark.parametrize("n", range(1, 65))
def test_fft_round_trip(n):
    x = np.random.default_rng(n).standard_normal(n)
    back = ifft(fft(x))
    assert np.abs(back.re - x).max() <= 1e-6 * max(1.0, np.abs(x).max())
    assert np.abs(back.im).max() < 1e-9


# -- frequency-domain correlation ----------------------------------------------


def test_xcorr_impulse():
    q = np.zeros((4, 1))
    q[0] = 1.0
    out = freq_cross_correlate(Tensor(q), Tensor(q)).data
    np.testing.assert_allclose(out[:, 0], [1, 0, 0, 0], atol=1e-12)


def test_xcorr_autocorrelation_of_ramp():
    q = np.array([[1.0], [2.0], [3.0], [4.0]])
    out = freq_cross_correlate(Tensor(q), Tensor(q)).data
    np.testing.assert_allclose(out, naive_xcorr(q, q), atol=1e-9)
    np.testing.assert_allclose(out[:, 0], [30, 24, 22, 24], atol=1e-9)


def test_xcorr_zero_key(rng):
    out = freq_cross_correlate(Tensor(rng.standard_normal((6, 3))), Tensor(np.zeros((6, 3)))).data
    assert np.abs(out).max() == 0.0


def test_xcorr_shape_mismatch():
    with pytest.raises(ValueError):
        freq_cross_correlate(Tensor(np.zeros((4, 2))), Tensor(np.zeros((5, 2))))


def test_xcorr_matches_loop_oracle_100_cases():
    rng = np.random.default_rng(7)
    for _ in range(100):
        T = int(rng.integers(1, 33))
        d = int(rng.integers(1, 9))
        q, k = rng.standard_normal((T, d)), rng.standard_normal((T, d))
        out = freq_cross_correlate(Tensor(q), Tensor(k)).data
        assert np.abs(out - naive_xcorr(q, k)).max() < 1e-6


def test_xcorr_batched_axis(rng):
    q, k = rng.standard_normal((3, 10, 4)), rng.standard_normal((3, 10, 4))
    out = freq_cross_correlate(Tensor(q), Tensor(k)).data
    for b in range(3):
        np.testing.assert_allclose(out[b], naive_xcorr(q[b], k[b]), atol=1e-9)


# -- backward -----------------------------------------------------------------


def test_backward_sum_gives_ones(rng):
    p = t64(rng, 3, 4)
    p.sum().backward()
    np.testing.assert_array_equal(p.grad, np.ones((3, 4)))


def test_backward_sum_of_squares():
    p = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
    (p * p).sum().backward()
    np.testing.assert_allclose(p.grad, [2.0, 4.0, 6.0])


def test_backward_requires_scalar(rng):
    p = t64(rng, 3)
    with pytest.raises(GraphError):
        (p * 2).backward()


def test_backward_without_grad_leaves(rng):
    with pytest.raises(GraphError):
        Tensor(rng.standard_normal(3)).sum().backward()


def test_backward_diamond_accumulates(rng):
    p = t64(rng, 5)
    a = p * 2
    (a * a + a).sum().backward()
    np.testing.assert_allclose(p.grad, 8 * p.data + 2)


def test_non_finite_is_error():
    with np.errstate(divide="ignore"), pytest.raises(NonFiniteError):
        Tensor(np.array([0.0])).log()


def test_no_grad_records_nothing(rng):
    p = t64(rng, 3)
    with no_grad():
        out = (p * p).sum()
    assert not out.requires_grad


def _dims(r, n, lo=1, hi=5):
    return [int(v) for v in r.integers(lo, hi + 1, size=n)]


def _conv1d_case(r):
    B, ci, co = _dims(r, 3, 1, 3)
    T = 2 * int(r.integers(2, 6))
    return (
        lambda x, w, b, g: (conv1d(x, w, b, stride=2, padding=1) * g).sum(),
        [(B, ci, T), (co, ci, 3), (co,), (B, co, T // 2)],
    )


def _convt_case(r):
    B, ci, co = _dims(r, 3, 1, 3)
    T = int(r.integers(2, 7))
    return (
        lambda x, w, b, g: (conv_transpose1d(x, w, b, stride=2, padding=2, output_padding=1) * g).sum(),
        [(B, ci, T), (ci, co, 5), (co,), (B, co, 2 * T)],
    )


def _conv2d_case(r):
    B, ci, co = _dims(r, 3, 1, 3)
    H, W = 2 * int(r.integers(2, 4)), 2 * int(r.integers(2, 4))
    return (
        lambda x, w, b, g: (conv2d(x, w, b, stride=2, padding=1) * g).sum(),
        [(B, ci, H, W), (co, ci, 3, 3), (co,), (B, co, H // 2, W // 2)],
    )


def _two(r):
    a, b = _dims(r, 2)
    return [(a, b), (a, b)]


# each entry maps an rng to (loss builder, input shapes); shapes are redrawn per trial
PRIMITIVES = {
    "add_broadcast": lambda r: (lambda a, b: ((a + b) ** 2).sum(), [tuple(_dims(r, 2)), (1,)]),
    "mul": lambda r: (lambda a, b: (a * b * a).sum(), _two(r)),
    "div": lambda r: (lambda a, b: (a / (b * b + 1.0)).sum(), _two(r)),
    "matmul": lambda r: (lambda a, b: ((a @ b) ** 2).sum(), (lambda d: [(d[0], d[1], d[2]), (d[2], d[3])])(_dims(r, 4))),
    "softmax": lambda r: (lambda a, w: (softmax(a, axis=-1) * w).sum(), _two(r)),
    "sigmoid": lambda r: (lambda a, w: (a.sigmoid() * w).sum(), _two(r)),
    "tanh": lambda r: (lambda a, w: (a.tanh() * w).sum(), _two(r)),
    "relu": lambda r: (lambda a, w: (a.relu() * w).sum(), _two(r)),
    "leaky_relu": lambda r: (lambda a, w: (leaky_relu(a) * w).sum(), _two(r)),
    "concat": lambda r: (lambda d: (lambda a, b, w: (concat([a, b], axis=1) * w).sum(), [(d[0], d[1]), (d[0], d[2]), (d[0], d[1] + d[2])]))(_dims(r, 3)),
    "stack": lambda r: (lambda d: (lambda a, b, w: (stack([a, b], axis=1) * w).sum(), [(d[0], d[1]), (d[0], d[1]), (d[0], 2, d[1])]))(_dims(r, 2)),
    "slice": lambda r: (lambda d: (lambda a, w: (a[1:, ::2] * w).sum(), [(d[0] + 1, d[1]), (d[0], (d[1] + 1) // 2)]))(_dims(r, 2)),
    "mean": lambda r: (lambda a: (a.mean(axis=1) ** 2).sum(), [tuple(_dims(r, 2))]),
    "transpose": lambda r: (lambda d: (lambda a, w: (a.transpose(2, 0, 1) * w).sum(), [tuple(d), (d[2], d[0], d[1])]))(_dims(r, 3)),
    "reshape": lambda r: (lambda d: (lambda a, w: (a.reshape(d[1], d[0]) * w).sum(), [tuple(d), (d[1], d[0])]))(_dims(r, 2)),
    "pad": lambda r: (lambda d: (lambda a, w: (pad(a, [(1, 2), (0, 1)]) * w).sum(), [tuple(d), (d[0] + 3, d[1] + 1)]))(_dims(r, 2)),
    "pool": lambda r: (lambda d: (lambda a, w: (avg_pool1d(a, 2, axis=1) * w).sum(), [(d[0], 2 * d[1], d[2]), (d[0], d[1], d[2])]))(_dims(r, 3)),
    "conv1d": _conv1d_case,
    "conv_transpose1d": _convt_case,
    "conv2d": _conv2d_case,
    "xcorr": lambda r: (lambda q, k, g: (freq_cross_correlate(q, k) * g).sum(), [tuple(_dims(r, 3, 1, 8))] * 3),
}


@pytest.mark.parametrize("name", sorted(PRIMITIVES))
def test_primitive_gradients(name):
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    for trial in range(20):
        fn, shapes = PRIMITIVES[name](rng)
        tensors = [Tensor(rng.standard_normal(s), requires_grad=True) for s in shapes]
        errs = check_gradients(lambda: fn(*tensors), tensors)
        assert max(errs.values()) < 1e-3, (name, trial, shapes, errs)


@pytest.mark.parametrize("trial", range(20))
def test_conv_gradients_random_shapes(trial):
    rng = np.random.default_rng(trial)
    B, cin, cout = (int(v) for v in rng.integers(1, 4, size=3))
    k = int(rng.choice([1, 3, 5]))
    T = int(rng.integers(k + 1, 12))
    stride = int(rng.integers(1, 3))
    x = Tensor(rng.standard_normal((B, cin, T)), requires_grad=True)
    w = Tensor(rng.standard_normal((cout, cin, k)), requires_grad=True)
    b = Tensor(rng.standard_normal(cout), requires_grad=True)
    out_shape = conv1d(x, w, b, stride=stride, padding=k // 2).shape
    g = rng.standard_normal(out_shape)
    errs = check_gradients(lambda: (conv1d(x, w, b, stride=stride, padding=k // 2) * g).sum(), [x, w, b])
    assert max(errs.values()) < 1e-3


def test_embedding_gradient_hits_selected_rows(rng):
    table = Tensor(rng.standard_normal((7, 3)), requires_grad=True)
    idx = np.array([1, 4, 1])
    embedding(table, idx).sum().backward()
    expected = np.zeros((7, 3))
    expected[1] = 2
    expected[4] = 1
    np.testing.assert_array_equal(table.grad, expected)


def test_embedding_out_of_range():
    with pytest.raises(IndexError):
        embedding(Tensor(np.zeros((3, 2))), np.array([3]))


def test_conv_transpose_length_inverts_pooling():
    x = Tensor(np.zeros((1, 2, 27)))
    w = Tensor(np.zeros((2, 2, 3)))
    assert conv_transpose1d(x, w, stride=2, padding=1, output_padding=1).shape == (1, 2, 54)


def test_conv_transpose_is_adjoint_of_conv(rng):
    # <conv(x), y> == <x, convT(y)> with the same weights and geometry
    x = rng.standard_normal((2, 3, 10))
    w = rng.standard_normal((4, 3, 5))
    y = rng.standard_normal((2, 4, 5))
    lhs = (conv1d(Tensor(x), Tensor(w), stride=2, padding=2).data * y).sum()
    rhs = (x * conv_transpose1d(Tensor(y), Tensor(w), stride=2, padding=2, output_padding=1).data).sum()
    assert lhs == pytest.approx(rhs)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.sampled_from([1, 2, 3]), st.floats(-3, 3), st.floats(-3, 3))
def test_pool_commutes_with_affine(n, k, a, b):
    x = np.random.default_rng(n).standard_normal((2, n * k * 2))
    lhs = avg_pool1d(Tensor(a * x + b), k).data
    rhs = a * avg_pool1d(Tensor(x), k).data + b
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_determinism_bitwise():
    def run():
        rng = np.random.default_rng(3)
        x = Tensor(rng.standard_normal((2, 3, 9)).astype(np.float32), requires_grad=True)
        w = Tensor(rng.standard_normal((4, 3, 3)).astype(np.float32), requires_grad=True)
        out = freq_cross_correlate(conv1d(x, w, padding=1), conv1d(x, w, padding=1)).tanh().sum()
        out.backward()
        return out.data.tobytes(), x.grad.tobytes(), w.grad.tobytes()

    assert run() == run()


# -- Adam -----------------------------------------------------------------------


def test_adam_zero_gradient_keeps_params():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    state = adam_step({"p": p}, {"p": np.zeros(2)}, AdamState(lr=0.1))
    np.testing.assert_array_equal(p.data, [1.0, -2.0])
    assert state.step == 1


def test_adam_first_step_moves_by_lr():
    p = Tensor(np.array([0.0]), requires_grad=True)
    adam_step({"p": p}, {"p": np.array([1.0])}, AdamState(lr=0.1))
    # m_hat = 1, v_hat = 1 -> p = -0.1 / (1 + 1e-8)
    assert p.data[0] == pytest.approx(-0.1 / (1 + 1e-8), rel=1e-12)


def test_adam_descends_quadratic():
    p = Tensor(np.array([2.0]), requires_grad=True)
    opt = Adam({"p": p}.items(), lr=0.1)
    losses = []
    for _ in range(3):
        opt.zero_grad()
        loss = (p * p).sum() * 0.5
        losses.append(loss.item())
        loss.backward()
        opt.step()
    assert losses[0] > losses[1] > losses[2]


def test_adam_nan_names_parameter():
    p = Tensor(np.zeros(2), requires_grad=True)
    with pytest.raises(FloatingPointError, match="weird"):
        adam_step({"weird": p}, {"weird": np.array([np.nan, 0.0])}, AdamState())


def test_adam_deterministic():
    def run():
        p = Tensor(np.array([0.3, -0.2]), requires_grad=True)
        state = AdamState(lr=0.05)
        for i in range(5):
            adam_step({"p": p}, {"p": np.array([0.1 * i, -1.0])}, state)
        return p.data.tobytes()

    assert run() == run()


# -- checkpoints ----------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path, rng):
    tensors = {"a.weight": rng.standard_normal((3, 4)).astype(np.float32), "b": np.arange(5, dtype=np.float32)}
    save_checkpoint(tmp_path / "ck", tensors, meta={"epoch": 3})
    loaded, meta = load_checkpoint(tmp_path / "ck")
    assert meta == {"epoch": 3}
    for k in tensors:
        np.testing.assert_array_equal(loaded[k], tensors[k])
    raw = (tmp_path / "ck" / "tensors.bin").read_bytes()
    assert len(raw) == 4 * (12 + 5)
