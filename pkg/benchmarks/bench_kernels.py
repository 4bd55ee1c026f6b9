#!/usr/bin/env python3
"""Compare the compiled LSTM gate kernels with the numpy fallback.

Times the raw kernels across batch shapes and a short end-to-end training
run. Run after building the extension:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from reforecast._kernels import _numpy_ref

try:
    from reforecast._kernels import _core
except ImportError:
    _core = None


def time_fn(fn, *args, repeat=200):
    best = float("inf")
    for _ in range(5):
        fn(*args)  # warm up
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels():
    print(f"{'shape':<14}{'direction':<10}{'numpy':>12}{'compiled':>12}{'speedup':>9}")
    rng = np.random.default_rng(0)
    for bsz, hid in [(32, 16), (192, 32), (512, 64)]:
        pre = rng.normal(size=(bsz, 4 * hid))
        c_prev = rng.normal(size=(bsz, hid))
        t_np = time_fn(_numpy_ref.lstm_gates_forward, pre, c_prev)
        row = f"({bsz}, {hid})"
        if _core is None:
            print(f"{row:<14}{'forward':<10}{t_np * 1e6:>10.1f}us{'n/a':>12}")
            continue
        t_cy = time_fn(_core.lstm_gates_forward, pre, c_prev)
        print(f"{row:<14}{'forward':<10}{t_np * 1e6:>10.1f}us{t_cy * 1e6:>10.1f}us"
              f"{t_np / t_cy:>8.2f}x")

        _, _, gi, gf, gg, go, tc = _numpy_ref.lstm_gates_forward(pre, c_prev)
        dh = rng.normal(size=(bsz, hid))
        dc = rng.normal(size=(bsz, hid))
        args = (dh, dc, gi, gf, gg, go, tc, c_prev)
        t_np = time_fn(_numpy_ref.lstm_gates_backward, *args)
        t_cy = time_fn(_core.lstm_gates_backward, *args)
        print(f"{row:<14}{'backward':<10}{t_np * 1e6:>10.1f}us{t_cy * 1e6:>10.1f}us"
              f"{t_np / t_cy:>8.2f}x")


def bench_training():
    """One short DGPVAR fit per backward-kernel backend.

    The forward kernel always runs on numpy (its exp/tanh calls vectorize
    better there); the backend choice only swaps the fused backward.
    """
    import reforecast._kernels as kernels
    from reforecast.argen import fit_model
    from reforecast.synthbench import SyntheticProcessConfig, generate_synthetic_trajectory

    ds = generate_synthetic_trajectory(SyntheticProcessConfig(n=400, m=10, d=3, seed=0))
    config = {"hidden": 32, "rank": 2,
              "train": {"epochs": 15, "batch_size": 64, "patience": 100, "seed": 0}}

    backends = [("numpy", _numpy_ref)] + ([("compiled", _core)] if _core else [])
    results = {}
    saved = kernels.lstm_gates_backward
    try:
        for rounds in range(3):  # first round warms caches; keep best of rest
            for name, impl in backends:
                kernels.lstm_gates_backward = impl.lstm_gates_backward
                t0 = time.perf_counter()
                model = fit_model("dgpvar", ds.updates, config)
                wall = time.perf_counter() - t0
                loss = model.history.train_loss[-1]
                if rounds and (name not in results or wall < results[name][0]):
                    results[name] = (wall, loss)
    finally:
        kernels.lstm_gates_backward = saved

    print("\nDGPVAR training (15 epochs, n=400, m'=8, d=3, hidden=32):")
    for name, (wall, loss) in results.items():
        print(f"  {name:<9} {wall:6.2f}s  final train NLL {loss:.6f}")
    if len(results) == 2:
        print(f"  speedup   {results['numpy'][0] / results['compiled'][0]:.2f}x")


if __name__ == "__main__":
    if _core is None:
        print("compiled extension not available; numpy timings only\n")
    bench_kernels()
    bench_training()
