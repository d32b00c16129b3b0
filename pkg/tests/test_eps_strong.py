import numpy as np
import pytest

from epsstrong.eps_strong import CSV_HEADER, DominatingPaths, dominating_csv, gap_metrics, run
from epsstrong.exceptions import DomainError


def test_generation_zero():
    part, hist = run(0.0, 0.5, 0, np.random.default_rng(0))
    assert len(part) == 1 and len(hist) == 1
    lo, hi = hist[0].evaluate([0.0, 0.5, 1.0])
    assert np.all(lo <= 0.0) and np.all(hi >= 0.5)
    m = gap_metrics(hist[0])
    r = part.rows[0]
    assert m["sup_gap"] == m["l1_gap"] == r[7] - r[4]
    with pytest.raises(DomainError):
        run(0.0, 0.5, -1, np.random.default_rng(0))


def test_sandwich_nested_and_contains_path():
    rng = np.random.default_rng(1)
    for _ in range(20):
        part, hist = run(0.0, -0.4, 6, rng, T=2.0)
        u = np.linspace(0.0, 2.0, 1025)
        prev = None
        for dom in hist:
            lo, hi = dom.evaluate(u)
            assert np.all(lo <= hi)
            if prev is not None:
                assert np.all(lo >= prev[0] - 1e-12) and np.all(hi <= prev[1] + 1e-12)
            prev = lo, hi
        # every revealed path value lies inside every earlier sandwich
        pts = np.append(part.s, 2.0)
        vals = np.append(part.rows[:, 2], part.rows[-1, 3])
        for dom in hist:
            lo, hi = dom.evaluate(pts)
            lo_l, hi_l = dom.evaluate(np.maximum(pts - 1e-9, 0.0))
            assert np.all(np.minimum(lo, lo_l) <= vals + 1e-12)
            assert np.all(vals <= np.maximum(hi, hi_l) + 1e-12)


def test_gap_metrics_shrink():
    rng = np.random.default_rng(2)
    l1s = np.zeros(9)
    for _ in range(20):
        _, hist = run(0.0, 0.0, 8, rng)
        m = [gap_metrics(d) for d in hist]
        s = np.array([v["sup_gap"] for v in m])
        l = np.array([v["l1_gap"] for v in m])
        assert np.all(np.diff(s) <= 1e-12) and np.all(np.diff(l) <= 1e-12)
        assert np.all(l <= s + 1e-12)
        l1s += l
    scaled = l1s[2:] / 20 * 2 ** (np.arange(2, 9) / 2)
    assert scaled.max() / scaled.min() < 2
    slope = np.polyfit(np.arange(2, 9), np.log2(l1s[2:]), 1)[0]
    assert -0.7 < slope < -0.3


def test_csv():
    _, hist = run(0.0, 0.1, 2, np.random.default_rng(3))
    text = dominating_csv(hist)
    lines = text.splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + 1 + 2 + 4
    g, a, b, lo, hi = lines[-1].split(",")
    assert g == "2" and float(b) == 1.0 and float(lo) < float(hi)


def test_evaluate_boundary_convention():
    d = DominatingPaths(1, np.array([0.0, 0.5]), np.array([0.5, 1.0]),
                        np.array([-1.0, -2.0]), np.array([1.0, 2.0]))
    lo, hi = d.evaluate([0.25, 0.5, 1.0])
    assert lo.tolist() == [-1.0, -2.0, -2.0] and hi.tolist() == [1.0, 2.0, 2.0]
