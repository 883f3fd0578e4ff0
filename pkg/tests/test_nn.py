import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisecnn.data import ClassLabel, Window
from noisecnn.nn import gradcheck
from noisecnn.nn import layers as L
from noisecnn.nn.layers import LayerSpec, conv1d_forward, output_geometry, sepconv1d_forward
from noisecnn.nn.model import Network, load_checkpoint, predict_from_logits, preset, save_checkpoint
from noisecnn.nn.train import Adam, TrainConfig, TrainingDiverged, adam_step, train


def naive_conv(x, w, b, stride, padding):
    """Direct loops over output channel, position, input channel and tap."""
    c_in, length = x.shape
    c_out, _, k = w.shape
    if padding == "SAME":
        out_len = -(-length // stride)
        total = max((out_len - 1) * stride + k - length, 0)
        left = total // 2
    else:
        out_len = (length - k) // stride + 1
        left = 0
    y = np.zeros((c_out, out_len))
    for o in range(c_out):
        for t in range(out_len):
            acc = b[o]
            for c in range(c_in):
                for j in range(k):
                    i = t * stride + j - left
                    if 0 <= i < length:
                        acc += w[o, c, j] * x[c, i]
            y[o, t] = acc
    return y


class TestConv:
    def test_identity_kernel(self):
        np.testing.assert_array_equal(conv1d_forward([[1, 2, 3]], [[[1]]], [0]), [[1, 2, 3]])

    def test_box_filter_valid(self):
        np.testing.assert_array_equal(conv1d_forward([[1, 1, 1, 1]], [[[1, 1]]], [0], padding="VALID"), [[2, 2, 2]])

    @pytest.mark.parametrize("stride, padding", [(1, "SAME"), (1, "VALID"), (2, "SAME"), (3, "VALID")])
    def test_matches_naive_oracle(self, stride, padding):
        gen = np.random.default_rng(stride)
        x = gen.normal(size=(3, 17))
        w = gen.normal(size=(2, 3, 5))
        b = gen.normal(size=2)
        out = conv1d_forward(x, w, b, stride, padding)
        assert np.max(np.abs(out - naive_conv(x, w, b, stride, padding))) < 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(L.ShapeError):
            conv1d_forward(np.zeros((2, 8)), np.zeros((1, 3, 3)), np.zeros(1))

    @settings(max_examples=200, deadline=None)
    @given(length=st.integers(1, 512), k=st.integers(1, 31), stride=st.integers(1, 4))
    def test_same_length(self, length, k, stride):
        out = conv1d_forward(np.ones((1, length)), np.ones((1, 1, k)), np.zeros(1), stride, "SAME")
        assert out.shape[1] == -(-length // stride) == output_geometry(length, k, stride, "SAME")[0]


class TestSepConv:
    def test_identity_factorisation(self):
        x = np.random.default_rng(0).normal(size=(3, 10))
        impulse = np.zeros((3, 5))
        impulse[:, 2] = 1.0
        out = sepconv1d_forward(x, impulse, np.eye(3))
        np.testing.assert_array_equal(out, x)

    @pytest.mark.parametrize("seed", range(10))
    def test_equals_composed_conv(self, seed):
        gen = np.random.default_rng(seed)
        c_in, c_out, k = gen.integers(1, 6), gen.integers(1, 6), gen.integers(1, 8)
        length = int(gen.integers(k, 40))
        stride = int(gen.integers(1, 3))
        padding = ["SAME", "VALID"][seed % 2]
        x = gen.normal(size=(2, c_in, length))
        d = gen.normal(size=(c_in, k))
        p = gen.normal(size=(c_out, c_in))
        bp = gen.normal(size=c_out)
        composed = p[:, :, None] * d[None, :, :]
        out = sepconv1d_forward(x, d, p, None, bp, stride, padding)
        assert np.max(np.abs(out - conv1d_forward(x, composed, bp, stride, padding))) < 1e-12

    def test_param_counts(self):
        assert L.conv_param_count(16, 32, 64) == 16 * 32 * 64 + 64 == 32832
        assert L.sepconv_param_count(16, 32, 64) == 16 * 32 + 32 + 32 * 64 + 64 == 2656
        std = L.Conv1D(32, 64, 16)
        sep = L.SepConv1D(32, 64, 16)
        assert sum(a.size for a in std.params.values()) == 32832
        assert sum(a.size for a in sep.params.values()) == 2656

    def test_economy_condition(self):
        # separable is strictly smaller exactly when (k - 1)(C_out - 1) > 2
        for k in range(1, 32):
            for c_out in range(1, 40):
                for c_in in (1, 3, 16):
                    smaller = L.sepconv_param_count(k, c_in, c_out) < L.conv_param_count(k, c_in, c_out)
                    assert smaller == ((k - 1) * (c_out - 1) > 2)

    @given(k=st.integers(3, 64), c_in=st.integers(1, 256), c_out=st.integers(3, 256))
    def test_separable_smaller_on_grid(self, k, c_in, c_out):
        assert L.sepconv_param_count(k, c_in, c_out) < L.conv_param_count(k, c_in, c_out)


class TestLayerGradients:
    @pytest.mark.parametrize("trial", range(20))
    def test_every_layer_kind(self, trial):
        gen = np.random.default_rng(100 + trial)
        n, c, o = (int(v) for v in gen.integers(1, 4, 3))
        length = int(gen.integers(6, 24))
        k = int(gen.integers(1, 6))
        stride = int(gen.integers(1, 3))
        padding = ["SAME", "VALID"][trial % 2]
        x = gen.normal(size=(n, c, length))
        candidates = [
            L.Conv1D(c, o, k, stride, padding, gen),
            L.SepConv1D(c, o, k, stride, padding, gen),
            L.MaxPool1D(int(gen.integers(1, 4))),
            L.ReLU(),
            L.GlobalAvgPool(),
            L.Dense(c * length, o, gen),
        ]
        for layer in candidates:
            for name in layer.params:
                layer.params[name] = layer.params[name] + 0.1 * gen.normal(size=layer.params[name].shape)
            errors = gradcheck.check_layer(layer, x, gen)
            assert max(errors.values()) < 1e-4, (layer.kind, errors)
        logits = 3 * gen.normal(size=(n, o + 1))
        assert gradcheck.check_softmax_ce(logits, gen.integers(0, o + 1, n)) < 1e-4

    def test_toy_network(self):
        arch = [LayerSpec(L.CONV1D, 3, 4), LayerSpec(L.RELU), LayerSpec(L.MAXPOOL1D, 2, stride=2),
                LayerSpec(L.CONV1D, 3, 3), LayerSpec(L.RELU), LayerSpec(L.GLOBALAVGPOOL),
                LayerSpec(L.DENSE, out_channels=3), LayerSpec(L.SOFTMAX)]
        gen = np.random.default_rng(0)
        net = Network(arch, (1, 16), seed=3)
        errors = gradcheck.check_network(net, gen.normal(size=(5, 1, 16)), gen.integers(0, 3, 5))
        assert max(errors.values()) < 1e-4, errors

    def test_softmax_ce_closed_form(self):
        gen = np.random.default_rng(1)
        logits = gen.normal(size=(4, 3))
        labels = np.array([0, 2, 1, 2])
        _, grad = L.softmax_cross_entropy(logits, labels)
        np.testing.assert_allclose(grad, (L.softmax(logits) - np.eye(3)[labels]) / 4, atol=1e-15)

    def test_maxpool_ties_route_to_first(self):
        pool = L.MaxPool1D(2)
        pool.forward(np.array([[[3.0, 3.0, 1.0, 5.0]]]))
        np.testing.assert_array_equal(pool.backward(np.array([[[1.0, 2.0]]])), [[[1.0, 0.0, 0.0, 2.0]]])


class TestAdam:
    def test_zero_grads(self):
        p = {"w": np.array([1.0, -2.0])}
        Adam(0.1).step(p, {"w": np.zeros(2)})
        np.testing.assert_array_equal(p["w"], [1.0, -2.0])

    def test_first_step(self):
        p = {"x": np.array([0.0])}
        adam_step(p, {"x": np.array([1.0])}, Adam(learning_rate=0.1))
        assert p["x"][0] == pytest.approx(-0.1 / (1 + 1e-8), abs=1e-15)

    def test_quadratic(self):
        opt = Adam(learning_rate=0.3)
        p = {"x": np.array([5.0])}
        for _ in range(100):
            opt.step(p, {"x": 2 * p["x"]})
        assert abs(p["x"][0]) < 0.5

    def test_non_finite_gradient_names_parameter(self):
        with pytest.raises(TrainingDiverged, match="3.w"):
            Adam().step({"3.w": np.zeros(2)}, {"3.w": np.array([0.0, np.nan])})

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0)
        with pytest.raises(ValueError):
            TrainConfig(beta1=1.0)
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)


def separable_windows(n=100, dim=8, seed=0):
    gen = np.random.default_rng(seed)
    labels = [ClassLabel(0, "neg"), ClassLabel(1, "pos")]
    out = []
    for i in range(n):
        cls = i % 2
        out.append(Window((1.0 if cls else -1.0) + 0.3 * gen.normal(size=dim), labels[cls], f"w{i}"))
    return out


TOY_ARCH = [LayerSpec(L.CONV1D, 3, 4), LayerSpec(L.RELU), LayerSpec(L.GLOBALAVGPOOL),
            LayerSpec(L.DENSE, out_channels=2), LayerSpec(L.SOFTMAX)]


class TestTrain:
    def test_separable_toy_fits(self):
        ws = separable_windows()
        net, hist = train(TOY_ARCH, ws, [], TrainConfig(epochs=50, batch_size=10, learning_rate=0.02,
                                                        early_stop_patience=50, seed=1))
        x = np.stack([w.values for w in ws])
        pred = net.predict(x)
        assert np.array_equal(pred, [w.label.index for w in ws])
        assert len(hist) <= 50

    def test_deterministic(self):
        ws = separable_windows(40)
        cfg = TrainConfig(epochs=3, batch_size=8, seed=7)
        a, ha = train(TOY_ARCH, ws, ws[:10], cfg)
        b, hb = train(TOY_ARCH, ws, ws[:10], cfg)
        assert ha == hb
        assert all(a.get_state()[k].tobytes() == v.tobytes() for k, v in b.get_state().items())

    def test_early_stopping_returns_best_epoch(self):
        scores = {1: 0.5, 2: 0.7, 3: 0.6, 4: 0.5, 5: 0.4, 6: 0.3}
        snapshots = {}

        def scripted(net, epoch):
            snapshots[epoch] = net.get_state()
            return scores[epoch]

        net, hist = train(TOY_ARCH, separable_windows(20), [], TrainConfig(epochs=6, early_stop_patience=2, seed=2),
                          evaluate=scripted)
        assert len(hist) <= 5
        assert net.best_epoch == 2
        assert all(np.array_equal(v, snapshots[2][k]) for k, v in net.get_state().items())

    def test_zero_learning_rate_like_step_keeps_params(self):
        # Adam with zero gradients is a no-op; the closest analogue to a zero-lr step
        net = Network(TOY_ARCH, (1, 8), seed=0)
        before = net.get_state()
        Adam(learning_rate=1e-300).step(net.named_params(), {k: np.zeros_like(v) for k, v in before.items()})
        assert all(np.array_equal(v, before[k]) for k, v in net.get_state().items())

    def test_empty_training_set(self):
        with pytest.raises(ValueError):
            train(TOY_ARCH, [], [], TrainConfig())

    def test_divergence_detected(self):
        ws = separable_windows(20)
        ws[3] = Window(np.full(8, np.inf), ws[3].label)
        with pytest.raises(TrainingDiverged):
            train(TOY_ARCH, ws, [], TrainConfig(epochs=1, batch_size=20))


class TestPredict:
    def test_argmax_and_ties(self):
        assert predict_from_logits([[2.0, 1.0, 1.0]]).tolist() == [0]
        assert predict_from_logits([[1.0, 1.0, 1.0]]).tolist() == [0]
        assert predict_from_logits([[0.0, 4.0, 4.0]]).tolist() == [1]

    def test_shape_mismatch(self):
        net = Network(TOY_ARCH, (1, 8))
        with pytest.raises(L.ShapeError):
            net.predict(np.zeros((2, 9)))


class TestPresetsAndCheckpoint:
    @pytest.mark.parametrize("clf", ["CNN", "SEPCNN"])
    def test_preset_shapes(self, clf):
        net = Network(preset(clf, 4), (1, 256))
        assert net.forward(np.zeros((2, 1, 256))).shape == (2, 4)

    def test_separable_preset_is_smaller(self):
        std = Network(preset("CNN", 4), (1, 256)).param_count()
        sep = Network(preset("SEPCNN", 4), (1, 256)).param_count()
        assert sep < std

    def test_round_trip_byte_identical(self, tmp_path):
        net = Network(preset("SEPCNN", 3), (1, 64), seed=5)
        save_checkpoint(net, tmp_path / "a.json")
        back = load_checkpoint(tmp_path / "a.json")
        save_checkpoint(back, tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
        x = np.random.default_rng(0).normal(size=(3, 1, 64))
        np.testing.assert_array_equal(net.forward(x), back.forward(x))

    def test_rejects_foreign_file(self, tmp_path):
        (tmp_path / "x.json").write_text('{"format": "other"}')
        with pytest.raises(ValueError):
            load_checkpoint(tmp_path / "x.json")
