"""Watching the pack search minimize a test function.

Thirty wolves hunt the minimum of a shifted sphere in five dimensions.
Three leaders pull the pack; the exploration coefficient decays from 2
to 0, so early iterations roam and late ones close in.  The alpha
fitness history never increases because leaders are only replaced by
strictly better candidates.
"""

import numpy as np

from cpwt.gwo import optimize


def sphere(x: np.ndarray) -> float:
    return float(np.sum((x - 0.5) ** 2))


position, value, history = optimize(sphere, n_wolves=30, d=5, max_iters=200, seed=0)

print("iteration  alpha fitness")
for i in (0, 4, 9, 24, 49, 99, 199):
    print(f"{i + 1:9d}  {history[i]:.3e}")

print(f"\nbest position: {np.round(position, 4)}")
print(f"best fitness:  {value:.3e}")
print(f"monotone history: {all(b <= a for a, b in zip(history, history[1:]))}")
