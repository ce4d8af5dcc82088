"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--size 2500] [--repeat 7]

Also times one full training step (rollout + backward, lost sales, T=100) under
each backend by swapping the module-level kernel bindings.
"""
import argparse
import timeit

import numpy as np

from invlab import _kernels
from invlab._kernels import compiled_backend, python_backend


def kernel_cases(n: int, rng: np.random.Generator):
    avail = rng.gamma(4.0, 10.0, n)
    d = rng.gamma(4.0, 10.0, n)
    p, b, h = rng.uniform(2, 6, n), rng.uniform(0, 1, n), rng.uniform(0.5, 1.5, n)
    g1, g2 = rng.normal(size=n), rng.normal(size=n)
    a = rng.uniform(0.5, 20.0, n)
    u = rng.uniform(0.01, 0.99, n)
    return {
        "sell_forward": lambda m: m.sell_forward(avail, d, p, b, h),
        "sell_backward": lambda m: m.sell_backward(g1, g2, avail, d, p, b, h),
        "sell_backlog_forward": lambda m: m.sell_backlog_forward(avail, d, p, b, h),
        "sell_backlog_backward": lambda m: m.sell_backlog_backward(g1, g2, avail, d, p, b, h),
        "gammainc_p": lambda m: m.gammainc_p(a, a * 1.1),
        "gamma_ppf": lambda m: m.gamma_ppf(a, u, a),
    }


def best_time(fn, repeat: int) -> float:
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def training_step(n: int):
    from invlab.datagen import synthetic_dataset
    from invlab.envs import EnvSpec
    from invlab.policy import PolicyConfig
    from invlab.trainer import TrainConfig, train

    data = synthetic_dataset(n, 32, 100, seed=0)
    cfg = TrainConfig(epochs=1, batch_size=n)
    return lambda: train(EnvSpec(), data, PolicyConfig(), cfg)


def with_backend(module, fn):
    names = ("sell_forward", "sell_backward", "sell_backlog_forward", "sell_backlog_backward", "gammainc_p",
             "gamma_ppf")
    saved = {k: getattr(_kernels, k) for k in names}

    def run():
        for k in names:
            setattr(_kernels, k, getattr(module, k))
        try:
            return fn()
        finally:
            for k, v in saved.items():
                setattr(_kernels, k, v)

    return run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=2500)
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--skip-step", action="store_true", help="skip the full training step timing")
    args = ap.parse_args()
    if compiled_backend is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    cases = kernel_cases(args.size, np.random.default_rng(0))
    print(f"{'kernel':<24}{'python (us)':>14}{'cython (us)':>14}{'speedup':>10}")
    for name, call in cases.items():
        tp = best_time(lambda: call(python_backend), args.repeat) * 1e6
        tc = best_time(lambda: call(compiled_backend), args.repeat) * 1e6
        print(f"{name:<24}{tp:>14.1f}{tc:>14.1f}{tp / tc:>9.1f}x")
    if not args.skip_step:
        step = training_step(args.size)
        tp = min(timeit.repeat(with_backend(python_backend, step), number=1, repeat=3))
        tc = min(timeit.repeat(with_backend(compiled_backend, step), number=1, repeat=3))
        print(f"{'training step':<24}{tp * 1e6:>14.0f}{tc * 1e6:>14.0f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
