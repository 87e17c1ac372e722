"""Benchmark the numba kernels against the pure-numpy fallback.

Times the forward pass and full BPTT at the two shapes that dominate real
training (copy/addition scale and pixel-sequence scale), checks that both
backends agree numerically, and prints the speedups.

    python benchmarks/bench_backends.py [--repeats 30]
"""

import argparse
import time

import numpy as np

from nonnormal import backend
from nonnormal.rnn import RnnParams, bptt, forward

SHAPES = {
    # label: (t_len, batch, n_hidden, d_in, classes, nonlinearity, loss)
    "copy-scale (T=100, N=100)": (100, 16, 100, 10, 9, "elu", "cross_entropy"),
    "addition-scale (T=100, N=100)": (100, 16, 100, 2, 1, "relu", "mse"),
    "pixel-scale (T=784, N=25)": (784, 16, 25, 1, 10, "elu", "cross_entropy"),
}


def make_case(shape, seed=0):
    t_len, batch, n, d, c, act, loss_kind = shape
    rng = np.random.default_rng(seed)
    params = RnnParams(
        w=rng.standard_normal((n, n)) * (0.9 / np.sqrt(n)),
        v=rng.standard_normal((n, d)) * 0.3,
        b=np.zeros(n),
        w_out=rng.standard_normal((c, n)) / np.sqrt(n),
        b_out=np.zeros(c),
    )
    x = rng.random((t_len, batch, d))
    mask = np.zeros(t_len, dtype=bool)
    if loss_kind == "cross_entropy" and c > 1:
        mask[:] = True
        targets = rng.integers(0, c, (t_len, batch))
    else:
        mask[-1] = True
        targets = rng.standard_normal((t_len, batch, c))
    return params, x, targets, mask, act, loss_kind


def time_call(fn, repeats):
    fn()  # warm up (JIT compile / allocator)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=30)
    args = parser.parse_args()

    names = backend.available()
    if "numba" not in names:
        print("numba is not importable; nothing to compare")
        return

    print(f"{'case':34s} {'kernel':8s} {'numpy':>10s} {'numba':>10s} "
          f"{'speedup':>8s}")
    for label, shape in SHAPES.items():
        params, x, targets, mask, act, loss_kind = make_case(shape)
        timings = {}
        results = {}
        for name in ("numpy", "numba"):
            with backend.backend(name):
                timings[name, "forward"] = time_call(
                    lambda: forward(params, act, x), args.repeats)
                timings[name, "bptt"] = time_call(
                    lambda: bptt(params, act, x, targets, mask, loss_kind),
                    args.repeats)
                results[name] = bptt(params, act, x, targets, mask, loss_kind)
        loss_np, grads_np = results["numpy"]
        loss_nb, grads_nb = results["numba"]
        assert abs(loss_np - loss_nb) < 1e-10, "backends disagree on loss"
        for (name, a), (_, b) in zip(grads_np.named_arrays(),
                                     grads_nb.named_arrays()):
            assert np.abs(a - b).max() < 1e-10 * max(np.abs(a).max(), 1.0), \
                f"backends disagree on {name}"
        for kernel in ("forward", "bptt"):
            t_np = timings["numpy", kernel]
            t_nb = timings["numba", kernel]
            print(f"{label:34s} {kernel:8s} {t_np * 1e3:9.2f}ms "
                  f"{t_nb * 1e3:9.2f}ms {t_np / t_nb:7.2f}x")
    print("\nbackends agree on loss and gradients (checked to 1e-10)")


if __name__ == "__main__":
    main()
