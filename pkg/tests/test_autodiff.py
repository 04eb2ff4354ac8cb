import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from inr_forge.autodiff import (as_matrix, backward, finite_diff_check, forward,
                                matmul, predict)
from inr_forge.errors import DivergenceError, InrError, ShapeError
from inr_forge.network import (EncodingSpec, GaborReal, Network, NetworkSpec, Relu,
                               Sine, Trident, build_network)


def triple_loop(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


def small_net(act, layers=2, width=8, enc=None, seed=0, d_in=2, d_out=1):
    return build_network(NetworkSpec(d_in, d_out, layers, width, act, enc, seed))


# -- matmul --------------------------------------------------------------------

def test_matmul_identity():
    assert np.array_equal(matmul(np.eye(2), [[3.0], [4.0]]), [[3.0], [4.0]])


def test_matmul_hand_arithmetic():
    assert np.array_equal(matmul([[1, 2], [3, 4]], [[5], [6]]), [[17.0], [39.0]])


def test_matmul_matches_triple_loop_exactly():
    rng = np.random.default_rng(7)
    a = rng.standard_normal((7, 5))
    b = rng.standard_normal((5, 3))
    assert np.array_equal(matmul(a, b), triple_loop(a, b))


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeError) as exc:
        matmul(np.ones((2, 3)), np.ones((2, 3)))
    assert "(2, 3) vs (2, 3)" in str(exc.value)


def test_as_matrix_rejects_non_finite():
    with pytest.raises(ValueError):
        as_matrix([[1.0, np.nan]])
    with pytest.raises(ValueError):
        as_matrix([[np.inf]])


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31))
def test_matmul_property_triple_loop(m, k, n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((m, k))
    b = rng.standard_normal((k, n))
    assert np.array_equal(matmul(a, b), triple_loop(a, b))


# -- forward -------------------------------------------------------------------

def test_identity_network_returns_coords():
    spec = NetworkSpec(3, 3, 0, 1, Trident(), None)
    net = Network(spec, [(np.eye(3), np.zeros(3))])
    x = np.random.default_rng(0).standard_normal((10, 3))
    values, _ = forward(net, x)
    assert np.array_equal(values, x)


def test_zero_weight_trident_hidden_is_one():
    spec = NetworkSpec(2, 1, 1, 4, Trident(1.0), None)
    w_out = np.array([[0.5, -1.0, 2.0, 0.25]])
    net = Network(spec, [(np.zeros((4, 2)), np.zeros(4)), (w_out, np.array([0.1]))])
    values, tape = forward(net, np.ones((3, 2)))
    assert np.array_equal(tape.records[0].out, np.ones((3, 4)))
    assert np.allclose(values, w_out.sum() + 0.1, rtol=0, atol=1e-15)


def straight_line(net, coords):
    # composition written out independently of forward(), same operation order
    spec = net.spec
    x = coords
    if spec.encoding is not None:
        f = spec.encoding.frequencies()
        cols = []
        for d in range(coords.shape[1]):
            v = coords[:, d]
            cols.append(v)
            for fj in f:
                cols.append(np.cos(2.0 * np.pi * v * fj))
                cols.append(np.sin(2.0 * np.pi * v * fj))
        x = np.stack(cols, axis=1)
    for i, (w, b) in enumerate(net.weights):
        z = x @ w.T + b
        if i == len(net.weights) - 1:
            return z
        a = spec.activation
        if isinstance(a, Trident):
            x = np.exp(-np.square(a.s0 * z))
        elif isinstance(a, Sine):
            x = np.sin(a.omega0 * z)
        elif isinstance(a, GaborReal):
            x = np.cos(a.omega0 * z) * np.exp(-np.square(a.s0 * z))
        else:
            x = np.maximum(z, 0.0)


@pytest.mark.parametrize("act", [Trident(5.0), Sine(10.0), GaborReal(), Relu()])
@pytest.mark.parametrize("enc", [None, EncodingSpec(10.0, 3)])
def test_forward_matches_straight_line_oracle(act, enc):
    net = small_net(act, layers=3, width=12, enc=enc, seed=3)
    x = np.random.default_rng(1).uniform(-1, 1, (17, 2))
    values, _ = forward(net, x)
    assert np.array_equal(values, straight_line(net, x))


def test_forward_shape_mismatch():
    net = small_net(Relu())
    with pytest.raises(ShapeError):
        forward(net, np.zeros((4, 3)))


def test_forward_nan_is_divergence():
    net = small_net(Relu())
    net.weights[-1][1][0] = np.nan
    with pytest.raises(DivergenceError):
        forward(net, np.zeros((4, 2)))


def test_tape_has_one_record_per_layer():
    net = small_net(Trident(), layers=3, enc=EncodingSpec(10.0, 2))
    _, tape = forward(net, np.zeros((2, 2)))
    assert [r.kind for r in tape.records] == ["encoding", "hidden", "hidden", "hidden", "output"]
    assert np.array_equal(tape.records[0].frequencies, EncodingSpec(10.0, 2).frequencies())


def test_predict_matches_forward_across_chunks():
    net = small_net(Sine(), enc=None)
    x = np.random.default_rng(2).uniform(-1, 1, (101, 2))
    assert np.array_equal(predict(net, x, chunk=16), forward(net, x)[0])


def test_float32_network_computes_in_float32():
    net = small_net(Trident()).astype(np.float32)
    values, tape = forward(net, np.zeros((3, 2)))
    assert values.dtype == np.float32
    g = backward(net, tape, np.ones((3, 1)))
    assert all(p.dtype == np.float32 for p in g.as_list())


# -- backward ------------------------------------------------------------------

def test_zero_upstream_gives_zero_gradients():
    net = small_net(Trident(), enc=EncodingSpec(4.0, 2))
    _, tape = forward(net, np.random.default_rng(0).uniform(-1, 1, (5, 2)))
    g = backward(net, tape, np.zeros((5, 1)))
    assert all(not np.any(p) for p in g.as_list())


def test_single_affine_layer_matches_regression_gradient():
    rng = np.random.default_rng(4)
    spec = NetworkSpec(3, 2, 0, 1, Relu(), None)
    net = Network(spec, [(rng.standard_normal((2, 3)), rng.standard_normal(2))])
    x = rng.standard_normal((9, 3))
    y = rng.standard_normal((9, 2))
    pred, tape = forward(net, x)
    n = pred.size
    g = backward(net, tape, 2.0 * (pred - y) / n)
    expected_dw = (2.0 / n) * (pred - y).T @ x
    assert np.allclose(g.dW[0], expected_dw, rtol=1e-14, atol=1e-15)
    assert np.allclose(g.db[0], (2.0 / n) * (pred - y).sum(0), rtol=1e-14, atol=1e-15)


def test_gradient_shapes_match_parameters():
    net = small_net(Sine(), layers=3, width=5, enc=EncodingSpec(3.0, 2), d_out=2)
    before = [p.shape for p in net.parameters()]
    _, tape = forward(net, np.zeros((4, 2)))
    g = backward(net, tape, np.ones((4, 2)))
    assert [p.shape for p in g.as_list()] == before
    assert [p.shape for p in net.parameters()] == before


def test_tape_is_single_use():
    net = small_net(Relu())
    _, tape = forward(net, np.zeros((2, 2)))
    backward(net, tape, np.ones((2, 1)))
    with pytest.raises(InrError):
        backward(net, tape, np.ones((2, 1)))


def test_tape_from_other_network_rejected():
    a, b = small_net(Relu(), seed=0), small_net(Relu(), seed=1)
    _, tape = forward(a, np.zeros((2, 2)))
    with pytest.raises(InrError):
        backward(b, tape, np.ones((2, 1)))


def test_upstream_shape_checked():
    net = small_net(Relu())
    _, tape = forward(net, np.zeros((2, 2)))
    with pytest.raises(ShapeError):
        backward(net, tape, np.ones((3, 1)))


def test_relu_derivative_zero_at_zero():
    spec = NetworkSpec(1, 1, 1, 1, Relu(), None)
    net = Network(spec, [(np.ones((1, 1)), np.zeros(1)), (np.ones((1, 1)), np.zeros(1))])
    _, tape = forward(net, np.zeros((1, 1)))
    g = backward(net, tape, np.ones((1, 1)))
    assert g.dW[0][0, 0] == 0.0 and g.db[0][0] == 0.0


def test_forward_backward_deterministic():
    x = np.random.default_rng(5).uniform(-1, 1, (20, 2))
    runs = []
    for _ in range(2):
        net = small_net(Trident(), enc=EncodingSpec(10.0, 4), seed=9)
        v, tape = forward(net, x)
        runs.append([v] + backward(net, tape, np.ones_like(v)).as_list())
    for a, b in zip(*runs):
        assert a.tobytes() == b.tobytes()


# -- finite differences ----------------------------------------------------------

def test_finite_diff_linear_net():
    rng = np.random.default_rng(0)
    spec = NetworkSpec(2, 1, 0, 1, Relu(), None)
    net = Network(spec, [(rng.standard_normal((1, 2)), rng.standard_normal(1))])
    x = rng.uniform(-1, 1, (8, 2))
    assert finite_diff_check(net, x, rng.standard_normal((8, 1))) < 1e-9


@pytest.mark.parametrize("act", [Trident(5.0), Sine(10.0), Relu()])
def test_finite_diff_three_layer_nets(act):
    rng = np.random.default_rng(11)
    net = small_net(act, layers=2, width=6, seed=2)
    x = rng.uniform(-1, 1, (10, 2))
    assert finite_diff_check(net, x, rng.standard_normal((10, 1))) < 1e-5


def test_finite_diff_gabor_encoded():
    # on raw coordinates with s0=10 most Gabor units sit in the dead tail of
    # the window, where central-difference truncation dominates; the encoded
    # input keeps them active
    rng = np.random.default_rng(11)
    net = small_net(GaborReal(), layers=2, width=16, enc=EncodingSpec(10.0, 4), seed=2)
    x = rng.uniform(-1, 1, (12, 2))
    assert finite_diff_check(net, x, rng.standard_normal((12, 1))) < 1e-5


def test_finite_diff_rejects_bad_eps():
    net = small_net(Relu())
    with pytest.raises(ValueError):
        finite_diff_check(net, np.zeros((1, 2)), np.zeros((1, 1)), eps=0.0)


@settings(max_examples=8, deadline=None)
@given(st.sampled_from(["trident", "sine", "relu"]), st.integers(0, 1000))
def test_gradient_exactness_property(kind, seed):
    act = {"trident": Trident(5.0), "sine": Sine(10.0), "relu": Relu()}[kind]
    rng = np.random.default_rng(seed)
    net = small_net(act, layers=2, width=4, enc=EncodingSpec(3.0, 1), seed=seed)
    x = rng.uniform(-1, 1, (6, 2))
    assert finite_diff_check(net, x, rng.standard_normal((6, 1))) < 1e-5
