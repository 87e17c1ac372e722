"""Tests for the RNN core: forward, BPTT vs finite differences, rmsprop."""

import math

import numpy as np
import pytest

from nonnormal import rng as rng_mod
from nonnormal.rnn import (RnnParams, TrainingDivergence, activation, bptt,
                           forward, init_rmsprop, load_checkpoint,
                           masked_loss, rmsprop_step, save_checkpoint,
                           sequence_loss)


def random_params(rng, n, d, c, scale=0.4):
    return RnnParams(
        w=rng.standard_normal((n, n)) * scale,
        v=rng.standard_normal((n, d)) * scale,
        b=rng.standard_normal(n) * 0.1,
        w_out=rng.standard_normal((c, n)) * scale,
        b_out=rng.standard_normal(c) * 0.1,
    )


def naive_forward(params, kind, x):
    """Step-by-step per-sample reference, no batching tricks."""
    t_len, batch, _ = x.shape
    n, c = params.n_hidden, params.n_out
    h = np.zeros((t_len, batch, n))
    out = np.zeros((t_len, batch, c))
    for bi in range(batch):
        hprev = np.zeros(n)
        for t in range(t_len):
            pre = params.w @ hprev + params.v @ x[t, bi] + params.b
            ht, _ = activation(kind, pre)
            h[t, bi] = ht
            out[t, bi] = params.w_out @ ht + params.b_out
            hprev = ht
    return h, out


class TestActivation:
    def test_elu_at_zero(self):
        y, dy = activation("elu", np.array([0.0]))
        assert y[0] == 0.0 and dy[0] == 1.0

    def test_elu_sides(self):
        y, dy = activation("elu", np.array([-1.0, 2.0]))
        assert abs(y[0] - (math.exp(-1) - 1)) < 1e-15
        assert y[1] == 2.0 and dy[1] == 1.0

    def test_relu(self):
        y, dy = activation("relu", np.array([-2.0, 3.0]))
        assert y[0] == 0.0 and dy[0] == 0.0
        assert y[1] == 3.0 and dy[1] == 1.0

    def test_tanh_saturates(self):
        y, dy = activation("tanh", np.array([30.0]))
        assert abs(y[0] - 1.0) < 1e-12 and dy[0] < 1e-12

    def test_derivative_consistency(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(200) * 2
        x = x[np.abs(x) > 1e-3]  # stay away from the relu kink
        eps = 1e-6
        for kind in ("linear", "relu", "tanh", "elu"):
            _, dy = activation(kind, x)
            yp, _ = activation(kind, x + eps)
            ym, _ = activation(kind, x - eps)
            fd = (yp - ym) / (2 * eps)
            assert np.abs(fd - dy).max() < 1e-6

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            activation("softplus", np.zeros(2))


class TestForward:
    def test_delay_line(self):
        # linear chain with source input is a pure delay line
        n, t_len = 8, 6
        params = RnnParams(
            w=np.diag(np.ones(n - 1), k=-1),
            v=np.eye(n, 1),
            b=np.zeros(n),
            w_out=np.zeros((1, n)),
            b_out=np.zeros(1),
        )
        rng = np.random.default_rng(1)
        s = rng.standard_normal(t_len)
        x = s.reshape(t_len, 1, 1)
        h, _ = forward(params, "linear", x)
        for t in range(t_len):
            for k in range(t + 1):
                assert h[t, 0, k] == pytest.approx(s[t - k], abs=0)
            assert np.all(h[t, 0, t + 1:] == 0)

    def test_zero_dynamics_outputs_bias(self):
        params = RnnParams(w=np.zeros((4, 4)), v=np.zeros((4, 2)),
                           b=np.zeros(4), w_out=np.zeros((3, 4)),
                           b_out=np.array([1.0, -2.0, 0.5]))
        x = np.random.default_rng(2).standard_normal((5, 3, 2))
        _, out = forward(params, "tanh", x)
        assert np.allclose(out, np.broadcast_to([1.0, -2.0, 0.5], (5, 3, 3)))

    def test_matches_naive_reference(self):
        rng = np.random.default_rng(3)
        params = random_params(rng, n=3, d=2, c=2)
        x = rng.standard_normal((5, 4, 2))
        for kind in ("linear", "relu", "tanh", "elu"):
            h, out = forward(params, kind, x)
            h_ref, out_ref = naive_forward(params, kind, x)
            assert np.abs(h - h_ref).max() < 1e-12
            assert np.abs(out - out_ref).max() < 1e-12

    def test_h0_carries_state(self):
        rng = np.random.default_rng(4)
        params = random_params(rng, n=4, d=2, c=1)
        x = rng.standard_normal((3, 2, 2))
        h0 = rng.standard_normal(4)
        h, _ = forward(params, "linear", x, h0=h0)
        expected = params.w @ h0 + params.v @ x[0, 0] + params.b
        assert np.allclose(h[0, 0], expected)

    def test_divergence_reports_step(self):
        params = RnnParams(w=np.full((2, 2), 1e300), v=np.ones((2, 1)),
                           b=np.zeros(2), w_out=np.ones((1, 2)),
                           b_out=np.zeros(1))
        x = np.ones((4, 1, 1))
        with pytest.raises(TrainingDivergence) as err:
            forward(params, "linear", x)
        assert err.value.step in (1, 2)


class TestBptt:
    def test_zero_mask_zero_loss_and_grads(self):
        rng = np.random.default_rng(5)
        params = random_params(rng, 4, 2, 3)
        x = rng.standard_normal((6, 2, 2))
        targets = np.zeros((6, 2), dtype=np.int64)
        loss, grads = bptt(params, "tanh", x, targets, np.zeros(6, dtype=bool),
                           "cross_entropy")
        assert loss == 0.0
        for _, g in grads.named_arrays():
            assert np.all(g == 0.0)

    def test_uniform_logits_cross_entropy(self):
        c = 7
        params = RnnParams(w=np.zeros((4, 4)), v=np.zeros((4, 2)),
                           b=np.zeros(4), w_out=np.zeros((c, 4)),
                           b_out=np.zeros(c))
        rng = np.random.default_rng(6)
        x = rng.standard_normal((5, 3, 2))
        targets = rng.integers(0, c, (5, 3))
        mask = np.ones(5, dtype=bool)
        loss, _ = bptt(params, "tanh", x, targets, mask, "cross_entropy")
        assert abs(loss - math.log(c)) < 1e-12

    @pytest.mark.parametrize("kind", ["linear", "relu", "tanh", "elu"])
    @pytest.mark.parametrize("loss_kind", ["mse", "cross_entropy"])
    def test_gradients_match_finite_differences(self, kind, loss_kind):
        rng = np.random.default_rng(hash((kind, loss_kind)) % 2**32)
        for _ in range(4):
            n = int(rng.integers(2, 7))
            d = int(rng.integers(1, 4))
            c = int(rng.integers(2, 5))
            t_len = int(rng.integers(2, 9))
            batch = int(rng.integers(1, 4))
            params = random_params(rng, n, d, c)
            x = rng.standard_normal((t_len, batch, d))
            mask = rng.random(t_len) < 0.5
            mask[rng.integers(0, t_len)] = True
            if loss_kind == "cross_entropy":
                targets = rng.integers(0, c, (t_len, batch))
            else:
                targets = rng.standard_normal((t_len, batch, c))
            loss, grads = bptt(params, kind, x, targets, mask, loss_kind)
            eps = 1e-5
            for name, garr in grads.named_arrays():
                flat_index = rng.integers(0, garr.size, size=min(6, garr.size))
                for fi in np.unique(flat_index):
                    idx = np.unravel_index(fi, garr.shape)
                    pp = params.copy()
                    getattr(pp, name)[idx] += eps
                    up = bptt(pp, kind, x, targets, mask, loss_kind)[0]
                    pm = params.copy()
                    getattr(pm, name)[idx] -= eps
                    down = bptt(pm, kind, x, targets, mask, loss_kind)[0]
                    fd = (up - down) / (2 * eps)
                    an = garr[idx]
                    rel = abs(fd - an) / max(abs(fd), abs(an), 1e-8)
                    assert rel < 1e-4, f"{name}{idx}: fd={fd} an={an}"

    def test_batch_is_average_of_samples(self):
        rng = np.random.default_rng(8)
        params = random_params(rng, 5, 3, 4)
        x = rng.standard_normal((6, 4, 3))
        targets = rng.integers(0, 4, (6, 4))
        mask = np.array([1, 0, 1, 1, 0, 1], dtype=bool)
        loss, grads = bptt(params, "elu", x, targets, mask, "cross_entropy")
        per_losses = []
        per_grads = []
        for bi in range(4):
            li, gi = bptt(params, "elu", x[:, bi:bi + 1], targets[:, bi:bi + 1],
                          mask, "cross_entropy")
            per_losses.append(li)
            per_grads.append(gi)
        assert abs(loss - np.mean(per_losses)) < 1e-10
        for name, g in grads.named_arrays():
            avg = np.mean([getattr(gi, name) for gi in per_grads], axis=0)
            assert np.abs(g - avg).max() < 1e-10

    def test_masked_loss_matches_bptt(self):
        rng = np.random.default_rng(9)
        params = random_params(rng, 4, 2, 3)
        x = rng.standard_normal((5, 3, 2))
        targets = rng.integers(0, 3, (5, 3))
        mask = np.array([1, 1, 0, 1, 0], dtype=bool)
        loss, _ = bptt(params, "tanh", x, targets, mask, "cross_entropy")
        eval_loss = sequence_loss(params, "tanh", x, targets, mask,
                                  "cross_entropy")
        assert abs(loss - eval_loss) < 1e-12

    def test_bad_loss_kind(self):
        rng = np.random.default_rng(10)
        params = random_params(rng, 3, 2, 2)
        with pytest.raises(ValueError):
            bptt(params, "tanh", np.zeros((2, 1, 2)), np.zeros((2, 1)),
                 np.ones(2, dtype=bool), "hinge")


class TestRmsprop:
    def test_zero_gradient_no_change(self):
        rng = np.random.default_rng(11)
        params = random_params(rng, 4, 2, 3)
        before = params.copy()
        state = init_rmsprop(params, learning_rate=1e-3)
        rmsprop_step(state, params, params.zeros_like())
        for (_, a), (_, b) in zip(params.named_arrays(), before.named_arrays()):
            assert np.array_equal(a, b)

    def test_first_step_divisor(self):
        params = RnnParams(w=np.zeros((1, 1)), v=np.zeros((1, 1)),
                           b=np.zeros(1), w_out=np.zeros((1, 1)),
                           b_out=np.zeros(1))
        grads = params.copy()
        g = 2.0
        grads.w[0, 0] = g
        state = init_rmsprop(params, learning_rate=0.1, decay=0.9,
                             epsilon=1e-8)
        rmsprop_step(state, params, grads)
        expected = -0.1 * g / (math.sqrt(0.1) * abs(g) + 1e-8)
        assert abs(params.w[0, 0] - expected) < 1e-12

    def test_constant_gradient_fixed_point(self):
        params = RnnParams(w=np.zeros((1, 1)), v=np.zeros((1, 1)),
                           b=np.zeros(1), w_out=np.zeros((1, 1)),
                           b_out=np.zeros(1))
        grads = params.zeros_like()
        grads.b[0] = -3.0
        lr = 0.01
        state = init_rmsprop(params, learning_rate=lr)
        prev = 0.0
        for _ in range(400):
            prev = params.b[0]
            rmsprop_step(state, params, grads)
        # accumulator converges to g^2, so each step approaches lr * sign(g)
        assert abs((params.b[0] - prev) - lr) < 1e-6

    def test_accumulators_nonnegative(self):
        rng = np.random.default_rng(12)
        params = random_params(rng, 3, 2, 2)
        state = init_rmsprop(params, learning_rate=1e-3)
        for _ in range(10):
            grads = random_params(rng, 3, 2, 2)
            rmsprop_step(state, params, grads)
        for _, s in state.sq.named_arrays():
            assert np.all(s >= 0.0)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(13)
        params = random_params(rng, 6, 3, 4)
        meta = {"kind": "chain", "value": 1.02, "seed": 5}
        path = tmp_path / "net.npz"
        save_checkpoint(path, params, meta)
        loaded, loaded_meta = load_checkpoint(path)
        for (_, a), (_, b) in zip(params.named_arrays(), loaded.named_arrays()):
            assert np.array_equal(a, b)
        assert loaded_meta == meta


class TestDeterminism:
    def test_same_seed_same_losses(self):
        def short_run():
            rng = rng_mod.child_rng(123, rng_mod.TRAIN)
            params = random_params(np.random.default_rng(0), 6, 2, 3)
            state = init_rmsprop(params, learning_rate=1e-3)
            losses = []
            for _ in range(5):
                x = rng.standard_normal((4, 2, 2))
                targets = rng.integers(0, 3, (4, 2))
                loss, grads = bptt(params, "elu", x, targets,
                                   np.ones(4, dtype=bool), "cross_entropy")
                rmsprop_step(state, params, grads)
                losses.append(loss)
            return losses

        assert short_run() == short_run()
