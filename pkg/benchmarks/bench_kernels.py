"""Compiled vs pure-Python kernels: per-call timings and an end-to-end training run.

    python benchmarks/bench_kernels.py [--repeat 5] [--episodes 4000]
"""

from __future__ import annotations

import argparse
import os
import random
import subprocess
import sys
import timeit

from curiosity_lab import _kernels_py

try:
    from curiosity_lab import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

TRAIN_SNIPPET = """
import time
from curiosity_lab import kernels
from curiosity_lab.harness.experiments import bundled_config, run_config
cfg = bundled_config("exercise_diffacc")
t = time.perf_counter()
run_config(cfg, {{"total_steps": {episodes}, "eval_every": {episodes}, "eval_episodes": 50}})
print(kernels.BACKEND, time.perf_counter() - t)
"""


def _cases(rng: random.Random):
    b = [rng.random() for _ in range(8)]
    s = sum(b)
    b = [x / s for x in b]
    lik = [rng.random() for _ in range(8)]
    logits = [rng.gauss(0, 1) for _ in range(28)]
    valid = tuple(range(0, 28, 2))
    rewards = [rng.random() for _ in range(10)]
    values = [rng.random() for _ in range(10)] + [0.0]
    return {
        "belief_update": lambda k: k.belief_update(b, lik),
        "entropy": lambda k: k.entropy(b),
        "kl_divergence": lambda k: k.kl_divergence(b, lik, 1e-12),
        "masked_softmax": lambda k: k.masked_softmax(logits, valid),
        "gae_propagate": lambda k: k.gae_propagate(rewards, values, 0.95, 0.95),
        "strategy_probs": lambda k: k.strategy_probs(0.2, 0.25, 0.4, 0.5, 0.4),
    }


def micro(repeat: int, number: int = 20000) -> None:
    print(f"{'kernel':<16}{'python us':>12}{'compiled us':>14}{'speedup':>10}")
    for name, fn in _cases(random.Random(0)).items():
        py = min(timeit.repeat(lambda: fn(_kernels_py), number=number, repeat=repeat)) / number * 1e6
        if _kernels_c is None:
            print(f"{name:<16}{py:>12.3f}{'n/a':>14}{'':>10}")
            continue
        c = min(timeit.repeat(lambda: fn(_kernels_c), number=number, repeat=repeat)) / number * 1e6
        print(f"{name:<16}{py:>12.3f}{c:>14.3f}{py / c:>9.1f}x")


def end_to_end(episodes: int) -> None:
    backends = ["python"] + (["cython"] if _kernels_c is not None else [])
    for backend in backends:
        env = dict(os.environ, CURIOSITY_LAB_KERNELS=backend)
        res = subprocess.run([sys.executable, "-c", TRAIN_SNIPPET.format(episodes=episodes)],
                             env=env, capture_output=True, text=True, check=True)
        name, secs = res.stdout.split()
        print(f"train {episodes} episodes [{name}]: {float(secs):.2f} s")


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--episodes", type=int, default=4000)
    args = p.parse_args()
    micro(args.repeat)
    end_to_end(args.episodes)


if __name__ == "__main__":
    main()
