"""Walk through how a Brownian path gets squeezed between two step functions.

Run:  python demos/sandwich_walkthrough.py
"""
import numpy as np

from epsstrong import gap_metrics, run, stream

rng = stream(seed=2024, index=0)

# A path from 0 to W_1 ~ N(0, 1).  Generation 0 only knows one interval
# for the minimum and one for the maximum.
w1 = rng.normal()
part, trace = run(0.0, w1, 10, rng)
print(f"W_1 = {w1:+.4f}\n")

print(" gen  layers   sup gap    L1 gap   L1 gap * 2^(n/2)")
for dom in trace:
    m = gap_metrics(dom)
    n = dom.generation
    print(f"{n:4d} {len(dom):7d} {m['sup_gap']:9.4f} {m['l1_gap']:9.5f} {m['l1_gap'] * 2 ** (n / 2):10.3f}")

# the last column hovers around a constant: the L1 gap halves every two generations

# Every revealed skeleton point sits inside every earlier sandwich.
times = np.append(part.s, 1.0)
values = np.append(part.rows[:, 2], part.rows[-1, 3])
lo, hi = trace[3].evaluate(times)
print("\nskeleton inside generation-3 sandwich:", bool(np.all((lo <= values) & (values <= hi))))

# Layers of the final generation, first few rows
print()
print("\n".join(part.to_text().splitlines()[:5]))
