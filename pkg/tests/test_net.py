import numpy as np
import pytest

from fluxlab.net import (AdamW, MLP, ShapeMismatchError, StaleTapeError,
                         flatten, load_checkpoint, save_checkpoint, unflatten)

from oracles import finite_difference_grad, grad_close


def small_mlp(seed=0, sizes=(3, 4, 2)):
    return MLP(sizes, np.random.default_rng(seed))


class TestForward:
    def test_zero_weights_zero_output(self):
        mlp = small_mlp()
        mlp.set_params([np.zeros_like(p) for p in mlp.params()])
        y, _ = mlp.forward(np.ones((5, 3)))
        assert np.all(y == 0.0)

    def test_purity_duplicate_input(self):
        mlp = small_mlp(3)
        x = np.random.default_rng(1).normal(size=(4, 3))
        y1, _ = mlp.forward(x)
        y2, _ = mlp.forward(x)
        assert np.array_equal(y1, y2)

    def test_single_linear_layer_is_matmul(self):
        mlp = MLP([3, 2], np.random.default_rng(2))
        x = np.random.default_rng(3).normal(size=(6, 3))
        y, _ = mlp.forward(x)
        assert np.allclose(y, x @ mlp.Ws[0] + mlp.bs[0], atol=1e-15)

    def test_shape_mismatch(self):
        mlp = small_mlp()
        with pytest.raises(ShapeMismatchError):
            mlp.forward(np.ones((2, 5)))


class TestBackward:
    def test_constant_loss_zero_grad(self):
        mlp = small_mlp(5)
        x = np.random.default_rng(0).normal(size=(4, 3))
        _, tape = mlp.forward(x)
        grads, dx = mlp.backward(tape, np.zeros((4, 2)))
        assert all(np.all(g == 0.0) for g in grads)
        assert np.all(dx == 0.0)

    def test_finite_difference_param_grads(self):
        rng = np.random.default_rng(7)
        for trial in range(5):
            mlp = MLP([3, 5, 4, 2], np.random.default_rng(trial))
            x = rng.normal(size=(3, 3))
            target = rng.normal(size=(3, 2))

            def loss_at(theta):
                m2 = MLP([3, 5, 4, 2], np.random.default_rng(trial))
                m2.set_params(unflatten(theta, m2.params()))
                y, _ = m2.forward(x)
                return float(np.sum((y - target) ** 2))

            y, tape = mlp.forward(x)
            grads, _ = mlp.backward(tape, 2.0 * (y - target))
            fd = finite_difference_grad(loss_at, flatten(mlp.params()))
            assert grad_close(flatten(grads), fd)

    def test_input_gradient_matches_fd(self):
        mlp = small_mlp(11)
        x0 = np.random.default_rng(4).normal(size=(2, 3))

        def loss_at_x(xf):
            y, _ = mlp.forward(xf.reshape(2, 3))
            return float(np.sum(y ** 2))

        y, tape = mlp.forward(x0)
        _, dx = mlp.backward(tape, 2.0 * y)
        fd = finite_difference_grad(loss_at_x, x0.ravel())
        assert grad_close(dx.ravel(), fd)

    def test_gradient_linearity(self):
        mlp = small_mlp(13)
        x = np.random.default_rng(5).normal(size=(4, 3))
        y, tape = mlp.forward(x)
        dy1 = np.random.default_rng(6).normal(size=y.shape)
        dy2 = np.random.default_rng(7).normal(size=y.shape)
        g1, _ = mlp.backward(tape, dy1)
        g2, _ = mlp.backward(tape, dy2)
        g12, _ = mlp.backward(tape, dy1 + dy2)
        for a, b, c in zip(g1, g2, g12):
            assert np.allclose(a + b, c, atol=1e-12)

    def test_stale_tape_rejected(self):
        mlp = small_mlp(17)
        _, tape = mlp.forward(np.ones((1, 3)))
        mlp.set_params([p.copy() for p in mlp.params()])
        with pytest.raises(StaleTapeError):
            mlp.backward(tape, np.ones((1, 2)))


class TestAdamW:
    def test_zero_grad_no_decay_unchanged(self):
        mlp = small_mlp(19)
        before = [p.copy() for p in mlp.params()]
        opt = AdamW(mlp.params(), weight_decay=0.0)
        opt.step(mlp.params(), [np.zeros_like(p) for p in mlp.params()], lr=0.1)
        for a, b in zip(mlp.params(), before):
            assert np.array_equal(a, b)

    def test_single_scalar_hand_computed(self):
        p = [np.array([1.0])]
        opt = AdamW(p, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=1e-4)
        g = [np.array([0.5])]
        opt.step(p, g, lr=0.01)
        m = 0.1 * 0.5
        v = 0.001 * 0.25
        mh = m / (1 - 0.9)
        vh = v / (1 - 0.999)
        want = 1.0 - 0.01 * (mh / (np.sqrt(vh) + 1e-8) + 1e-4 * 1.0)
        assert p[0][0] == pytest.approx(want, abs=1e-15)

    def test_quadratic_decreases_monotonically_after_warmup(self):
        # f(theta) = 0.5 theta^T A theta with A spd
        rng = np.random.default_rng(23)
        Q = rng.normal(size=(4, 4))
        A = Q.T @ Q + 0.5 * np.eye(4)
        theta = [5.0 + rng.normal(size=4)]
        opt = AdamW(theta, weight_decay=0.0)
        losses = []
        for _ in range(200):
            g = [A @ theta[0]]
            losses.append(0.5 * float(theta[0] @ A @ theta[0]))
            opt.step(theta, g, lr=0.01)
        tail = losses[20:]
        assert all(b <= a + 1e-12 for a, b in zip(tail, tail[1:]))
        assert losses[-1] < 0.5 * losses[20]

    def test_nonfinite_gradient_skipped(self, caplog):
        p = [np.array([1.0])]
        opt = AdamW(p)
        ok = opt.step(p, [np.array([np.nan])], lr=0.1)
        assert not ok
        assert p[0][0] == 1.0
        assert opt.t == 0


class TestCheckpoint:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(29)
        arrays = {"a.W0": rng.normal(size=(3, 4)), "b.b1": rng.normal(size=(5,))}
        meta = {"seed": 7, "step": 123, "config_hash": "abc"}
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, arrays, meta)
        loaded, meta2 = load_checkpoint(path)
        assert meta2 == meta
        for k in arrays:
            assert loaded[k].shape == arrays[k].shape
            assert np.allclose(loaded[k], arrays[k], atol=1e-6)  # f32 storage

    def test_magic_check(self, tmp_path):
        path = tmp_path / "bogus.ckpt"
        path.write_bytes(b"not a checkpoint")
        with pytest.raises(ValueError):
            load_checkpoint(path)


def test_bitwise_reproducibility():
    def run():
        mlp = MLP([4, 8, 3], np.random.default_rng(31))
        opt = AdamW(mlp.params())
        x = np.random.default_rng(32).normal(size=(5, 4))
        for _ in range(5):
            y, tape = mlp.forward(x)
            grads, _ = mlp.backward(tape, 2 * y)
            opt.step(mlp.params(), grads, lr=1e-3)
        return flatten(mlp.params())

    a, b = run(), run()
    assert np.array_equal(a, b)
