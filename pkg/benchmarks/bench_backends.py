#!/usr/bin/env python3
"""Timing comparison of the compiled kernel core against the numpy fallback.

Covers the two hot kernels (conv1d, lstm) in both directions plus an
end-to-end action-scoring pass.  Run after `pip install -e .`:

    python3 benchmarks/bench_backends.py [--repeats 7]
"""

import argparse
import time

import numpy as np

from crowdledger.classifiers import ActionClassifier, trailing_windows
from crowdledger.events import ActionEvent, TYPE_VOTE
from crowdledger.neural import backend


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def kernel_cases(kernels, rng):
    x_conv = rng.normal(size=(256, 16, 18))
    w = rng.normal(size=(32, 3, 18))
    b = rng.normal(size=32)
    y = kernels.conv1d_forward(x_conv, w, b)
    dy = rng.normal(size=y.shape)

    x_lstm = rng.normal(size=(64, 64, 1))
    wx = rng.normal(size=(1, 128)) * 0.3
    wh = rng.normal(size=(32, 128)) * 0.3
    bl = rng.normal(size=128) * 0.1
    h, c, gates = kernels.lstm_forward(x_lstm, wx, wh, bl)
    dh = rng.normal(size=h.shape)

    return {
        "conv1d forward (256x16x18 -> 32ch)": lambda: kernels.conv1d_forward(x_conv, w, b),
        "conv1d backward": lambda: kernels.conv1d_backward(x_conv, w, dy),
        "lstm forward (64x64, hidden 32)": lambda: kernels.lstm_forward(x_lstm, wx, wh, bl),
        "lstm backward": lambda: kernels.lstm_backward(x_lstm, wx, wh, h, c, gates, dh),
    }


def scoring_case(kernel_name, rng):
    saved = (backend.conv1d_forward, backend.conv1d_backward,
             backend.lstm_forward, backend.lstm_backward)
    kernels = backend.get_kernels(kernel_name)
    backend.conv1d_forward = kernels.conv1d_forward
    backend.conv1d_backward = kernels.conv1d_backward
    backend.lstm_forward = kernels.lstm_forward
    backend.lstm_backward = kernels.lstm_backward
    try:
        model = ActionClassifier(100, 200, seed=0)
        events = [
            ActionEvent(i, int(rng.integers(100)), 7, TYPE_VOTE,
                        1 if rng.random() < 0.5 else -1)
            for i in range(50)
        ]
        batch = model._window_batch(trailing_windows(events, model.window))
        return lambda: model.forward(batch, training=False)
    finally:
        (backend.conv1d_forward, backend.conv1d_backward,
         backend.lstm_forward, backend.lstm_backward) = saved


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    names = ["numpy"]
    try:
        backend.get_kernels("cython")
        names.append("cython")
    except ImportError:
        print("compiled extension not available; benchmarking numpy only")

    rng = np.random.default_rng(0)
    results: dict[str, dict[str, float]] = {}
    for name in names:
        kernels = backend.get_kernels(name)
        cases = kernel_cases(kernels, np.random.default_rng(0))
        cases["action scoring (50-event story)"] = scoring_case(name, rng)
        results[name] = {label: best_of(fn, args.repeats) for label, fn in cases.items()}

    labels = list(next(iter(results.values())))
    width = max(len(label) for label in labels)
    header = f"{'case':<{width}}" + "".join(f"{n:>12}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for label in labels:
        row = f"{label:<{width}}"
        for name in names:
            row += f"{results[name][label] * 1e3:>10.3f}ms"
        if len(names) == 2:
            ratio = results["numpy"][label] / results["cython"][label]
            row += f"{ratio:>9.2f}x"
        print(row)


if __name__ == "__main__":
    main()
