"""
An Ornstein-Uhlenbeck process with log-tailed jumps
===================================================

Between jumps the process decays exactly like x exp(-mu t), so paths are
simulated without discretisation error in log coordinates. Jumps have
tail (log r)^-2, which makes the invariant law of log x heavy-tailed.
"""
import math

import numpy as np

from subgeom import pathsim, stats, zoo

model = zoo.preset("levy-mc2")
path = pathsim.simulate_levy_ou(model, 1.0, T=50.0, seed=1)
print(f"{path.meta['jump_count']} jumps on [0, 50]")
print("largest log-jump:", round(max(path.meta["log_jumps"]), 3))

###############################################################################
# Time fractions above levels of V = log x, pooled over 8 long chains. The
# slope of log survival against log log r should be close to -1.

V = model.default_lyapunov()
thr = np.geomspace(1.5, 30.0, 8)
tail = pathsim.occupation_tail(model, 1.0, V, burn_in=200.0, T=20_000.0, thresholds=thr,
                               seed=2, n_chains=8)
for r, s in zip(thr, tail.survival):
    print(f"log x >= {r:6.2f}: {s:.4f}")
print("log-log slope", round(stats.loglog_slope(tail).slope, 3))

###############################################################################
# One path to CSV, with a knot per jump (values are log x).

path.to_csv("jump_ou_path.csv")
print("wrote jump_ou_path.csv,", len(path.times), "rows; final x =", f"{math.exp(path.final):.4g}")
