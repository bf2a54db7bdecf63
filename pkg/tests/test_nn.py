import math

import numpy as np
import pytest

from simsurrogate.errors import ModelConfigError
from simsurrogate.nn.autodiff import Tensor, concat, softmax, stack
from simsurrogate.nn.models import (
    ModelConfig,
    bidirectional_forward,
    gru_cell,
    init_params,
    linear_forward,
    lstm_cell,
    model_forward,
    model_forward_infer,
    multi_head_attention,
    sinusoidal_encoding,
    wrap_params,
)


def numeric_grad(fn, params, name, step=1e-3):
    """Central finite differences of scalar fn w.r.t. params[name]."""
    base = params[name]
    grad = np.zeros_like(base)
    it = np.nditer(base, flags=["multi_index"])
    while not it.finished:
        ix = it.multi_index
        orig = base[ix]
        base[ix] = orig + step
        hi = fn(params)
        base[ix] = orig - step
        lo = fn(params)
        base[ix] = orig
        grad[ix] = (hi - lo) / (2 * step)
        it.iternext()
    return grad


def check_grads(loss_fn, params, tol):
    """loss_fn(tensors) -> Tensor scalar; compares backprop to central diffs."""
    tensors = wrap_params(params)
    loss = loss_fn(tensors)
    loss.backward()

    def scalar(raw):
        return float(loss_fn(wrap_params(raw)).data)

    worst = 0.0
    for name in params:
        analytic = tensors[name].grad
        if analytic is None:
            analytic = np.zeros_like(params[name])
        numeric = numeric_grad(scalar, params, name)
        denom = max(np.abs(numeric).max(), np.abs(analytic).max(), 1e-8)
        err = np.abs(analytic - numeric).max() / denom
        worst = max(worst, err)
        assert err < tol, f"gradient mismatch for {name}: {err:.2e}"
    return worst


def rnn_params(rng, prefix, in_dim, hidden, gates):
    params = {}
    for g in gates:
        params[f"{prefix}.W{g}"] = rng.normal(0, 0.4, (in_dim, hidden))
        params[f"{prefix}.U{g}"] = rng.normal(0, 0.4, (hidden, hidden))
        params[f"{prefix}.b{g}"] = rng.normal(0, 0.4, hidden)
    return params


class TestLinear:
    def test_zero_input_gives_bias(self):
        w = Tensor(np.random.default_rng(0).normal(size=(3, 2)))
        b = Tensor(np.array([1.0, -2.0]))
        out = linear_forward(Tensor(np.zeros((4, 3))), w, b)
        np.testing.assert_allclose(out.data, np.tile([1.0, -2.0], (4, 1)))

    def test_identity_weights(self):
        x = np.random.default_rng(1).normal(size=(5, 3))
        out = linear_forward(Tensor(x), Tensor(np.eye(3)), Tensor(np.zeros(3)))
        np.testing.assert_allclose(out.data, x)

    def test_matches_manual_matmul(self):
        rng = np.random.default_rng(2)
        x, w, b = rng.normal(size=(4, 3)), rng.normal(size=(3, 2)), rng.normal(size=2)
        out = linear_forward(Tensor(x), Tensor(w), Tensor(b))
        manual = np.array([[sum(x[i, k] * w[k, j] for k in range(3)) + b[j]
                            for j in range(2)] for i in range(4)])
        np.testing.assert_allclose(out.data, manual)

    def test_shape_mismatch(self):
        with pytest.raises(ModelConfigError, match="shape mismatch"):
            linear_forward(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))),
                           Tensor(np.zeros(2)))


class TestGruCell:
    def test_zero_params_halve_state(self):
        rng = np.random.default_rng(0)
        params = {k: np.zeros_like(v)
                  for k, v in rnn_params(rng, "c", 4, 3, ("z", "r", "h")).items()}
        h_prev = rng.normal(size=(2, 3))
        h = gru_cell(Tensor(rng.normal(size=(2, 4))), Tensor(h_prev),
                     wrap_params(params), "c")
        np.testing.assert_allclose(h.data, 0.5 * h_prev, rtol=1e-12)

    def test_zero_state_zero_candidate(self):
        rng = np.random.default_rng(1)
        params = rnn_params(rng, "c", 4, 3, ("z", "r", "h"))
        params["c.Wh"][:] = 0
        params["c.Uh"][:] = 0
        params["c.bh"][:] = 0
        h = gru_cell(Tensor(rng.normal(size=(2, 4))), Tensor(np.zeros((2, 3))),
                     wrap_params(params), "c")
        np.testing.assert_allclose(h.data, 0.0, atol=1e-15)

    def test_gradients(self):
        rng = np.random.default_rng(2)
        params = rnn_params(rng, "c", 3, 4, ("z", "r", "h"))
        x = rng.normal(size=(2, 3))
        h0 = rng.normal(size=(2, 4))
        weights = rng.normal(size=(2, 4))

        def loss(t):
            return (gru_cell(Tensor(x), Tensor(h0), t, "c") * Tensor(weights)).sum()

        assert check_grads(loss, params, 1e-4) < 1e-4


class TestLstmCell:
    def test_zero_params(self):
        rng = np.random.default_rng(0)
        params = {k: np.zeros_like(v)
                  for k, v in rnn_params(rng, "c", 4, 3, ("i", "f", "o", "g")).items()}
        c_prev = rng.normal(size=(2, 3))
        h, c = lstm_cell(Tensor(rng.normal(size=(2, 4))),
                         (Tensor(np.zeros((2, 3))), Tensor(c_prev)),
                         wrap_params(params), "c")
        np.testing.assert_allclose(c.data, 0.5 * c_prev, rtol=1e-12)
        np.testing.assert_allclose(h.data, 0.5 * np.tanh(0.5 * c_prev), rtol=1e-12)

    def test_zero_cell_and_candidate(self):
        rng = np.random.default_rng(1)
        params = rnn_params(rng, "c", 4, 3, ("i", "f", "o", "g"))
        for k in ("Wg", "Ug", "bg"):
            params[f"c.{k}"][:] = 0
        h, c = lstm_cell(Tensor(rng.normal(size=(2, 4))),
                         (Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3)))),
                         wrap_params(params), "c")
        np.testing.assert_allclose(c.data, 0.0, atol=1e-15)
        np.testing.assert_allclose(h.data, 0.0, atol=1e-15)

    def test_gradients(self):
        rng = np.random.default_rng(2)
        params = rnn_params(rng, "c", 3, 4, ("i", "f", "o", "g"))
        x = rng.normal(size=(2, 3))
        h0 = rng.normal(size=(2, 4))
        c0 = rng.normal(size=(2, 4))
        weights = rng.normal(size=(2, 4))

        def loss(t):
            h, c = lstm_cell(Tensor(x), (Tensor(h0), Tensor(c0)), t, "c")
            return (h * Tensor(weights)).sum() + (c * Tensor(weights)).sum()

        assert check_grads(loss, params, 1e-4) < 1e-4


class TestBidirectional:
    def make_params(self, rng, in_dim, hidden, kind="bigru"):
        gates = ("z", "r", "h") if kind == "bigru" else ("i", "f", "o", "g")
        p = rnn_params(rng, "rnn0.fwd", in_dim, hidden, gates)
        p.update(rnn_params(rng, "rnn0.bwd", in_dim, hidden, gates))
        return p

    def test_t1_is_concat_of_single_steps(self):
        rng = np.random.default_rng(0)
        p = self.make_params(rng, 3, 4)
        x = rng.normal(size=(2, 1, 3))
        out = bidirectional_forward(Tensor(x), wrap_params(p), "rnn0", 4, "bigru")
        t = wrap_params(p)
        fwd = gru_cell(Tensor(x[:, 0]), Tensor(np.zeros((2, 4))), t, "rnn0.fwd")
        bwd = gru_cell(Tensor(x[:, 0]), Tensor(np.zeros((2, 4))), t, "rnn0.bwd")
        np.testing.assert_allclose(out.data[:, 0, :4], fwd.data)
        np.testing.assert_allclose(out.data[:, 0, 4:], bwd.data)

    def test_palindrome_symmetry(self):
        # with identical fwd/bwd params, a palindromic sequence gives
        # mirror-symmetric outputs with halves swapped
        rng = np.random.default_rng(1)
        gates = ("z", "r", "h")
        p = rnn_params(rng, "rnn0.fwd", 3, 4, gates)
        p.update({k.replace(".fwd", ".bwd"): v.copy() for k, v in p.items()})
        row = rng.normal(size=(1, 3))
        x = np.stack([row, 2 * row, row], axis=1)  # palindrome over T=3
        out = bidirectional_forward(Tensor(x), wrap_params(p), "rnn0", 4, "bigru").data
        for t in range(3):
            np.testing.assert_allclose(out[:, t, :4], out[:, 2 - t, 4:], rtol=1e-10)

    @pytest.mark.parametrize("kind", ["bigru", "bilstm"])
    def test_gradients(self, kind):
        rng = np.random.default_rng(2)
        p = self.make_params(rng, 3, 3, kind)
        x = rng.normal(size=(2, 3, 3))
        weights = rng.normal(size=(2, 3, 6))

        def loss(t):
            return (bidirectional_forward(Tensor(x), t, "rnn0", 3, kind)
                    * Tensor(weights)).sum()

        assert check_grads(loss, p, 1e-4) < 1e-4


def attention_params(rng, d):
    p = {}
    for n in ("q", "k", "v", "o"):
        p[f"a.W{n}"] = rng.normal(0, 0.4, (d, d))
        p[f"a.b{n}"] = rng.normal(0, 0.1, d)
    return p


class TestAttention:
    def identity_params(self, d):
        p = {}
        for n in ("q", "k", "v", "o"):
            p[f"a.W{n}"] = np.eye(d)
            p[f"a.b{n}"] = np.zeros(d)
        return p

    def test_t1_identity_projections_return_input(self):
        x = np.random.default_rng(0).normal(size=(2, 1, 4))
        out = multi_head_attention(Tensor(x), wrap_params(self.identity_params(4)), "a", 2)
        np.testing.assert_allclose(out.data, x, rtol=1e-12)

    def test_two_identical_positions_average(self):
        row = np.random.default_rng(1).normal(size=4)
        x = np.stack([row, row])[None]  # [1, 2, 4], equal logits -> weights 0.5/0.5
        out = multi_head_attention(Tensor(x), wrap_params(self.identity_params(4)), "a", 2)
        np.testing.assert_allclose(out.data[0, 0], row, rtol=1e-12)
        np.testing.assert_allclose(out.data[0, 1], row, rtol=1e-12)

    def test_attention_rows_sum_to_one_and_mask_zeroes(self):
        rng = np.random.default_rng(2)
        x = Tensor(rng.normal(size=(1, 4, 4)))
        mask = np.array([[True, True, True, False]])
        p = wrap_params(attention_params(rng, 4))
        q = (x @ p["a.Wq"] + p["a.bq"]).reshape(1, 4, 2, 2).transpose((0, 2, 1, 3))
        k = (x @ p["a.Wk"] + p["a.bk"]).reshape(1, 4, 2, 2).transpose((0, 2, 1, 3))
        scores = (q @ k.transpose((0, 1, 3, 2))) * (1 / math.sqrt(2))
        scores = scores.masked_fill(mask[:, None, None, :], -1e30)
        weights = softmax(scores, axis=-1).data
        np.testing.assert_allclose(weights.sum(axis=-1), 1.0, atol=1e-12)
        assert (weights[..., 3] == 0.0).all()

    def test_divisibility_enforced(self):
        with pytest.raises(ModelConfigError, match="divisible"):
            multi_head_attention(Tensor(np.zeros((1, 2, 4))),
                                 wrap_params(self.identity_params(4)), "a", 3)

    def test_gradients(self):
        rng = np.random.default_rng(3)
        p = attention_params(rng, 4)
        x = rng.normal(size=(2, 3, 4))
        weights = rng.normal(size=(2, 3, 4))

        def loss(t):
            return (multi_head_attention(Tensor(x), t, "a", 2) * Tensor(weights)).sum()

        assert check_grads(loss, p, 1e-4) < 1e-4

    def test_masked_gradients(self):
        rng = np.random.default_rng(4)
        p = attention_params(rng, 4)
        x = rng.normal(size=(1, 3, 4))
        mask = np.array([[True, True, False]])
        weights = rng.normal(size=(1, 3, 4)) * mask[..., None]

        def loss(t):
            return (multi_head_attention(Tensor(x), t, "a", 2, mask)
                    * Tensor(weights)).sum()

        assert check_grads(loss, p, 1e-4) < 1e-4


def tiny_config(arch, **kw):
    defaults = dict(architecture=arch, input_dim=3, output_dim=2, hidden_size=4,
                    num_layers=2, window_size=4, window_overlap=0, batch_size=2,
                    num_heads=2, seed=0)
    defaults.update(kw)
    return ModelConfig(**defaults)


class TestModelForward:
    @pytest.mark.parametrize("arch", ["bigru", "bilstm", "transformer"])
    def test_output_shape(self, arch):
        config = tiny_config(arch)
        params = init_params(config)
        x = np.random.default_rng(0).normal(size=(3, 4, 3))
        out = model_forward(config, wrap_params(params), x)
        assert out.shape == (3, 4, 2)

    @pytest.mark.parametrize("arch", ["bigru", "bilstm", "transformer"])
    def test_zero_output_layer_gives_bias(self, arch):
        config = tiny_config(arch)
        params = init_params(config)
        params["out.W"][:] = 0.0
        params["out.b"][:] = [1.5, -0.5]
        x = np.random.default_rng(1).normal(size=(2, 4, 3))
        out = model_forward(config, wrap_params(params), x)
        np.testing.assert_allclose(out.data, np.broadcast_to([1.5, -0.5], (2, 4, 2)))

    @pytest.mark.parametrize("arch", ["bigru", "bilstm", "transformer"])
    def test_deterministic_forward(self, arch):
        config = tiny_config(arch)
        params = init_params(config)
        x = np.random.default_rng(2).normal(size=(2, 4, 3))
        a = model_forward(config, wrap_params(params), x).data
        b = model_forward(config, wrap_params(params), x).data
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("arch", ["bigru", "bilstm", "transformer"])
    def test_window_permutation_equivariance(self, arch):
        config = tiny_config(arch)
        params = init_params(config)
        x = np.random.default_rng(3).normal(size=(4, 4, 3))
        perm = np.array([2, 0, 3, 1])
        out = model_forward(config, wrap_params(params), x).data
        out_perm = model_forward(config, wrap_params(params), x[perm]).data
        np.testing.assert_allclose(out_perm, out[perm], rtol=1e-12)

    @pytest.mark.parametrize("arch", ["bigru", "bilstm", "transformer"])
    def test_end_to_end_gradients(self, arch):
        config = tiny_config(arch, num_layers=1)
        params = init_params(config)
        rng = np.random.default_rng(4)
        x = rng.normal(size=(2, 4, 3))
        weights = rng.normal(size=(2, 4, 2))

        def loss(t):
            return (model_forward(config, t, x) * Tensor(weights)).sum()

        assert check_grads(loss, params, 1e-3) < 1e-3

    def test_feature_dim_mismatch(self):
        config = tiny_config("bigru")
        with pytest.raises(ModelConfigError, match="input_dim"):
            model_forward(config, wrap_params(init_params(config)), np.zeros((1, 4, 5)))


class TestConfigValidation:
    def test_heads_divisibility(self):
        with pytest.raises(ModelConfigError, match="divisible"):
            tiny_config("transformer", hidden_size=6, num_heads=4)

    def test_overlap_bound(self):
        with pytest.raises(ModelConfigError, match="window_overlap"):
            tiny_config("bigru", window_size=4, window_overlap=4)

    def test_init_deterministic(self):
        config = tiny_config("transformer")
        a = init_params(config)
        b = init_params(config)
        for k in a:
            np.testing.assert_array_equal(a[k], b[k])


def test_sinusoidal_encoding_shape_and_range():
    enc = sinusoidal_encoding(8, 6)
    assert enc.shape == (8, 6)
    assert np.abs(enc).max() <= 1.0


def test_concat_stack_softmax_helpers():
    a = Tensor(np.ones((2, 2)), requires_grad=True)
    b = Tensor(np.zeros((2, 3)), requires_grad=True)
    c = concat([a, b], axis=-1)
    assert c.shape == (2, 5)
    s = stack([a, a], axis=1)
    assert s.shape == (2, 2, 2)
    soft = softmax(Tensor(np.zeros((1, 4))), axis=-1)
    np.testing.assert_allclose(soft.data, 0.25)


class TestInferenceForward:
    @pytest.mark.parametrize("arch", ["bigru", "bilstm", "transformer"])
    def test_matches_autodiff_forward(self, arch):
        config = tiny_config(arch)
        params = init_params(config)
        rng = np.random.default_rng(5)
        windows = rng.normal(size=(3, config.window_size, config.input_dim))
        mask = np.ones((3, config.window_size), dtype=bool)
        mask[-1, 2:] = False
        slow = model_forward(config, wrap_params(params), windows, mask).data
        fast = model_forward_infer(config, params, windows, mask)
        np.testing.assert_allclose(fast, slow, rtol=1e-10, atol=1e-12)

    def test_feature_dim_mismatch(self):
        config = tiny_config("bigru")
        with pytest.raises(ModelConfigError, match="input_dim"):
            model_forward_infer(config, init_params(config), np.zeros((1, 4, 7)))
