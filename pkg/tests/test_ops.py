"""
Pruebas de las primitivas tensoriales: convoluciones, mapas afines,
activaciones y pérdidas.
"""

import itertools

import numpy as np
import numpy.testing as npt
import pytest

from network.errors import ConfigurationError
from ops.activations import (SCALE, SLOPE, out_tanh, out_tanh_grad_from_output, scaled_tanh,
                             scaled_tanh_grad, softmax_group, softmax_group_backward)
from ops.convolution import (Kernel4, conv_backward, conv_same, conv_same_backward, conv_transposed,
                             conv_transposed_backward, conv_valid, same_padding, transposed_extent,
                             valid_extent)
from ops.dense import affine, affine_backward
from ops.losses import PROB_FLOOR, kl_loss, softmax_kl_logit_grad, sse_loss


def _numeric(f, x, eps=1e-6):
    grad = np.zeros_like(x)
    flat, out = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        plus = f()
        flat[i] = keep - eps
        minus = f()
        flat[i] = keep
        out[i] = (plus - minus) / (2 * eps)
    return grad


# ==========================
# Formas
# ==========================
def test_shape_formulas():
    assert valid_extent((48, 64), (5, 5), (1, 1)) == (44, 60)
    assert valid_extent((44, 60), (4, 4), (2, 2)) == (21, 29)
    assert valid_extent((21, 29), (5, 5), (2, 2)) == (9, 13)
    assert transposed_extent((21, 29), (4, 4), (2, 2)) == (44, 60)
    assert transposed_extent((9, 13), (5, 5), (2, 2)) == (21, 29)
    assert transposed_extent((44, 60), (5, 5), (1, 1)) == (48, 64)


def test_same_padding_split():
    assert same_padding((2, 2)) == ((0, 1), (0, 1))
    assert same_padding((3, 3)) == ((1, 1), (1, 1))
    assert same_padding((4, 1)) == ((1, 2), (0, 0))


def test_conv_valid_output_shape(rng):
    x = rng.normal(size=(3, 2, 48, 64))
    k = Kernel4(rng.normal(size=(4, 2, 5, 5)), (1, 1))
    assert conv_valid(x, k).shape == (3, 4, 44, 60)


def test_conv_valid_matches_manual_correlation():
    x = np.arange(16, dtype=float).reshape(1, 4, 4)
    k = Kernel4(np.array([[[[1.0, 0.0], [0.0, -1.0]]]]), (2, 2))
    out = conv_valid(x, k, bias=np.array([0.5]))
    # x[2i, 2j] - x[2i+1, 2j+1] + 0.5 = -5 + 0.5
    npt.assert_array_equal(out, np.full((1, 2, 2), -4.5))


def test_kernel_rejects_bad_shapes(rng):
    with pytest.raises(ConfigurationError):
        Kernel4(rng.normal(size=(2, 2, 3)))
    k = Kernel4(rng.normal(size=(1, 2, 3, 3)))
    with pytest.raises(ConfigurationError):
        conv_valid(rng.normal(size=(1, 3, 8, 8)), k)
    with pytest.raises(ConfigurationError):
        conv_valid(rng.normal(size=(1, 2, 2, 8)), k)


# ==========================
# Adjunto
# ==========================
def test_transposed_is_exact_adjoint_on_random_cases():
    cases = 0
    for seed in range(100):
        r = np.random.default_rng(seed)
        c_in, c_out = r.integers(1, 4, size=2)
        kh, kw = r.integers(1, 6, size=2)
        sy, sx = r.integers(1, 4, size=2)
        ho, wo = r.integers(1, 7, size=2)
        h, w = transposed_extent((ho, wo), (kh, kw), (sy, sx))
        k = Kernel4(r.normal(size=(c_out, c_in, kh, kw)), (int(sy), int(sx)))
        x = r.normal(size=(2, c_in, h, w))
        y = r.normal(size=(2, c_out, ho, wo))
        lhs = np.sum(conv_valid(x, k) * y)
        rhs = np.sum(x * conv_transposed(y, k))
        assert abs(lhs - rhs) < 1e-10
        cases += 1
    assert cases == 100


def test_conv_backward_pads_dropped_border(rng):
    # 7 = 2 * 2 + 2 + 1: la última fila no entra en ninguna ventana
    x = rng.normal(size=(1, 1, 7, 7))
    k = Kernel4(rng.normal(size=(1, 1, 2, 2)), (2, 2))
    g = rng.normal(size=conv_valid(x, k).shape)
    grad_x, _, _ = conv_backward(x, k, g)
    assert grad_x.shape == x.shape
    npt.assert_array_equal(grad_x[..., 6, :], 0.0)
    npt.assert_array_equal(grad_x[..., :, 6], 0.0)


# ==========================
# Diferencias finitas
# ==========================
@pytest.mark.parametrize("stride,kernel", list(itertools.product([(1, 1), (2, 2), (1, 2)], [(2, 2), (3, 2)])))
def test_conv_valid_backward_matches_finite_differences(stride, kernel):
    r = np.random.default_rng(7)
    x = r.normal(size=(2, 2, 7, 8))
    k = Kernel4(r.normal(size=(3, 2) + kernel), stride)
    b = r.normal(size=3)
    g = r.normal(size=conv_valid(x, k, b).shape)

    def loss():
        return np.sum(conv_valid(x, k, b) * g)

    grad_x, grad_k, grad_b = conv_backward(x, k, g)
    npt.assert_allclose(grad_x, _numeric(loss, x), atol=1e-6)
    npt.assert_allclose(grad_k, _numeric(loss, k.data), atol=1e-6)
    npt.assert_allclose(grad_b, _numeric(loss, b), atol=1e-6)


def test_conv_transposed_backward_matches_finite_differences():
    r = np.random.default_rng(11)
    y = r.normal(size=(2, 3, 3, 4))
    k = Kernel4(r.normal(size=(3, 2, 3, 2)), (2, 1))
    b = r.normal(size=2)
    g = r.normal(size=conv_transposed(y, k, b).shape)

    def loss():
        return np.sum(conv_transposed(y, k, b) * g)

    grad_y, grad_k, grad_b = conv_transposed_backward(y, k, g)
    npt.assert_allclose(grad_y, _numeric(loss, y), atol=1e-6)
    npt.assert_allclose(grad_k, _numeric(loss, k.data), atol=1e-6)
    npt.assert_allclose(grad_b, _numeric(loss, b), atol=1e-6)


def test_conv_same_keeps_extent_and_backward(rng):
    x = rng.normal(size=(2, 2, 5, 6))
    k = Kernel4(rng.normal(size=(2, 2, 2, 2)))
    out = conv_same(x, k)
    assert out.shape == x.shape
    g = rng.normal(size=out.shape)

    def loss():
        return np.sum(conv_same(x, k) * g)

    grad_x, grad_k, _ = conv_same_backward(x, k, g)
    npt.assert_allclose(grad_x, _numeric(loss, x), atol=1e-6)
    npt.assert_allclose(grad_k, _numeric(loss, k.data), atol=1e-6)


def test_backward_skips_unrequested_grads(rng):
    x = rng.normal(size=(1, 1, 4, 4))
    k = Kernel4(rng.normal(size=(1, 1, 2, 2)))
    g = rng.normal(size=(1, 1, 3, 3))
    grad_x, grad_k, grad_b = conv_backward(x, k, g, need_kernel=False)
    assert grad_x is not None and grad_k is None and grad_b is None
    grad_x, grad_k, _ = conv_backward(x, k, g, need_input=False)
    assert grad_x is None and grad_k is not None


def test_zero_kernel_leaves_only_the_bias(rng):
    x = rng.normal(size=(2, 3, 7, 9))
    k = Kernel4(np.zeros((4, 3, 3, 3)), (2, 1))
    npt.assert_array_equal(conv_valid(x, k), 0.0)
    bias = np.array([0.0, 1.0, -2.0, 0.5])
    out = conv_valid(x, k, bias=bias)
    assert out.shape == (2, 4, 3, 7)
    npt.assert_array_equal(out, np.broadcast_to(bias[:, None, None], out.shape))


def test_single_pixel_backward_is_a_scalar_product():
    x = np.array([[[[1.5]]]])
    k = Kernel4(np.array([[[[-0.4]]]]))
    g = np.array([[[[2.0]]]])
    grad_x, grad_k, grad_b = conv_backward(x, k, g)
    npt.assert_allclose(grad_k, [[[[3.0]]]])
    npt.assert_allclose(grad_x, [[[[-0.8]]]])
    npt.assert_allclose(grad_b, [2.0])


def test_affine_and_backward(rng):
    w = rng.normal(size=(4, 3))
    x = rng.normal(size=(5, 3))
    b = rng.normal(size=4)
    npt.assert_allclose(affine(w, x, b)[2], w @ x[2] + b)
    g = rng.normal(size=(5, 4))

    def loss():
        return np.sum(affine(w, x, b) * g)

    grad_x, grad_w, grad_b = affine_backward(w, x, g)
    npt.assert_allclose(grad_x, _numeric(loss, x), atol=1e-6)
    npt.assert_allclose(grad_w, _numeric(loss, w), atol=1e-6)
    npt.assert_allclose(grad_b, _numeric(loss, b), atol=1e-6)
    with pytest.raises(ConfigurationError):
        affine(w, rng.normal(size=(5, 4)))


def test_identity_weights_leave_the_vector_unchanged(rng):
    x = rng.normal(size=(3, 6))
    npt.assert_array_equal(affine(np.eye(6), x), x)
    npt.assert_array_equal(affine(np.eye(6), x, np.zeros(6)), x)


# ==========================
# Activaciones
# ==========================
def test_scaled_tanh_constants_and_derivative():
    assert SCALE == 1.7159 and SLOPE == 2.0 / 3.0
    assert scaled_tanh(np.array(0.0)) == 0.0
    npt.assert_allclose(scaled_tanh(np.array(1.0)), 1.7159 * np.tanh(2.0 / 3.0))
    u = np.linspace(-3, 3, 13)
    numeric = (scaled_tanh(u + 1e-6) - scaled_tanh(u - 1e-6)) / 2e-6
    npt.assert_allclose(scaled_tanh_grad(u), numeric, atol=1e-8)


def test_scaled_tanh_reference_value_and_symmetry():
    assert scaled_tanh(np.array(1.5)) == pytest.approx(1.7159 * np.tanh(1.0), rel=1e-15)
    assert scaled_tanh(np.array(1.5)) == pytest.approx(1.3064, abs=1e-3)
    u = np.linspace(-4.0, 4.0, 17)
    npt.assert_allclose(scaled_tanh(-u), -scaled_tanh(u), rtol=1e-15, atol=0)
    assert np.all(np.abs(scaled_tanh(u)) < SCALE)


def test_out_tanh_values_and_derivative():
    npt.assert_allclose(out_tanh(np.array([0.0, 1.0, -1.0])), [0.0, np.tanh(1.0), -np.tanh(1.0)])
    assert np.tanh(1.0) == pytest.approx(0.76159, abs=1e-5)
    u = np.linspace(-2, 2, 9)
    numeric = (out_tanh(u + 1e-6) - out_tanh(u - 1e-6)) / 2e-6
    npt.assert_allclose(out_tanh_grad_from_output(out_tanh(u)), numeric, atol=1e-8)


def test_softmax_group_sums_and_stability():
    u = np.array([[1000.0, 1000.0, 0.0, 0.0, 0.0], [0.0, 0.0, -1000.0, 3.0, 2.0]])
    p = softmax_group(u, [2, 3])
    npt.assert_allclose(p[..., :2].sum(axis=-1), 1.0, atol=1e-12)
    npt.assert_allclose(p[..., 2:].sum(axis=-1), 1.0, atol=1e-12)
    npt.assert_allclose(p[0, :2], [0.5, 0.5])
    assert np.all(np.isfinite(p))
    with pytest.raises(ConfigurationError):
        softmax_group(u, [2, 2])
    with pytest.raises(ConfigurationError):
        softmax_group(u, [5, 0])


def test_softmax_group_backward(rng):
    u = rng.normal(size=(3, 20))
    g = rng.normal(size=(3, 20))
    groups = [10, 10]

    def loss():
        return np.sum(softmax_group(u, groups) * g)

    grad = softmax_group_backward(softmax_group(u, groups), g, groups)
    npt.assert_allclose(grad, _numeric(loss, u), atol=1e-7)


# ==========================
# Pérdidas
# ==========================
def test_sse_single_pixel_example():
    target = np.zeros((1, 4, 4))
    pred = target.copy()
    pred[0, 1, 2] = 0.25
    loss, grad = sse_loss(pred, target)
    assert loss == pytest.approx(0.25 ** 2)
    assert grad[0, 1, 2] == pytest.approx(0.5)
    assert sse_loss(target, target)[0] == 0.0


def test_kl_zero_on_identical_and_handles_zero_targets():
    p = np.array([0.2, 0.3, 0.5])
    assert kl_loss(p, p)[0] == 0.0
    target = np.array([0.0, 0.5, 0.5])
    pred = np.array([0.5, 0.25, 0.25])
    loss, grad, floored = kl_loss(target, pred)
    assert loss == pytest.approx(np.log(2.0))
    assert grad[0] == 0.0
    assert not floored


def test_kl_floor_is_flagged():
    target = np.array([0.5, 0.5])
    pred = np.array([1.0, 0.0])
    loss, _, floored = kl_loss(target, pred)
    assert floored
    assert np.isfinite(loss)
    assert loss == pytest.approx(0.5 * np.log(0.5 / PROB_FLOOR) + 0.5 * np.log(0.5))


def test_softmax_kl_logit_grad_matches_chain_rule(rng):
    u = rng.normal(size=(2, 10))
    target = softmax_group(rng.normal(size=(2, 10)), [10])

    def loss():
        return kl_loss(target, softmax_group(u, [10]))[0]

    grad = softmax_kl_logit_grad(target, softmax_group(u, [10]))
    npt.assert_allclose(grad, _numeric(loss, u), atol=1e-7)
