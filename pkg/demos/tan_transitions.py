"""Exact transitions of dX = -tan(X) dt + dW, compared with the eigen-expansion density.

Run:  python demos/tan_transitions.py
"""
import math

import numpy as np
from scipy.integrate import quad

from epsstrong import sample_transition, stream


def density(x, y, t, modes=200):
    k = np.arange(1, modes + 1)
    h = math.pi / 2
    q = (2 / math.pi) * np.sum(np.exp(-k * k * t / 2) * np.sin(k * (x + h)) * np.sin(k * (y + h)))
    return math.exp(t / 2) * math.cos(y) / math.cos(x) * q


for x0, t in [(0.0, 0.5), (1.2, 0.25), (1.5, 0.1)]:
    rng = stream(7, int(100 * x0))
    draws = [sample_transition(x0, t, rng, return_proposals=True) for _ in range(20000)]
    ys = np.array([d[0] for d in draws])
    acc = len(draws) / sum(d[1] for d in draws)
    counts, edges = np.histogram(ys, bins=12, range=(-math.pi / 2, math.pi / 2))
    width = edges[1] - edges[0]
    print(f"x0={x0}, t={t}: mean {ys.mean():+.4f}, acceptance {acc:.2f}")
    for a, b, c in zip(edges[:-1], edges[1:], counts):
        expect = quad(lambda y: density(x0, y, t), a, b)[0] * len(ys)
        bar = "#" * int(60 * c / len(ys) / width / 2)
        print(f"  {0.5 * (a + b):+.2f} {c:6d} {expect:8.0f}  {bar}")
    print()
