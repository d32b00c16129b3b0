"""End-to-end acceptance criteria, one test per criterion.

Each test records its outcome through the ``criterion`` fixture so the run
ends with one PASS/FAIL line per criterion.
"""

import math

import numpy as np
import pytest
from scipy import stats

from epsstrong.alt_series import zeta_level
from epsstrong.bridge_sampling import sample_midpoints
from epsstrong.cli import ExperimentConfig, main, run_experiment
from epsstrong.eps_strong import gap_metrics, run
from epsstrong.estimators import ConstantBounder, estimate_exponential, estimate_uniform_improved
from epsstrong.layer_events import ExtremaRanges, e_weight_bounds, refine_bernoulli, sample_E
from epsstrong.layers import IntersectionLayer
from epsstrong.options import BOUNDERS, MarketParams, draw_terminal_and_gate, map_gbm
from epsstrong.streams import stream
from epsstrong.tan_diffusion import HALF_PI, sample_transitions
from oracles import beta_ref, binned_chi2, ks_against_table, midpoint_cdf_table, tan_density

pytestmark = pytest.mark.acceptance


def overlaps(s, lo, hi):
    return s.ci95_low <= hi and s.ci95_high >= lo


def ci(s):
    return f"mean {s.mean:.5f}, CI [{s.ci95_low:.5f}, {s.ci95_high:.5f}]"


def price(experiment, samples, seed, **kw):
    return run_experiment(ExperimentConfig(experiment, samples=samples, seed=seed, **kw))


def test_criterion_1_fa(criterion):
    s = price("fa", 100_000, 1)
    criterion(1, "fa, 1e5 samples, CI overlaps [0.0683, 0.0693]",
              {"ci_overlap": overlaps(s, 0.0683, 0.0693), "no_undecided": s.undecided == 0},
              f"{ci(s)}, capped {s.hit_nmax_fraction:.4%}, bias bound {s.bias_bound:.2e}")


def test_criterion_2_fb(criterion):
    s = price("fb", 10_000, 2)
    criterion(2, "fb, 1e4 samples, CI overlaps [0.0081, 0.0128], bias bound < 3e-5 at nmax=10",
              {"ci_overlap": overlaps(s, 0.0081, 0.0128), "bias_bound": s.bias_bound < 3e-5},
              f"{ci(s)}, capped {s.hit_nmax_fraction:.4%}, bias bound {s.bias_bound:.2e}")


def test_criterion_3_fc(criterion):
    s = price("fc", 100_000, 3)
    criterion(3, "fc, 1e5 samples, CI overlaps [0.0842, 0.0854]",
              {"ci_overlap": overlaps(s, 0.0842, 0.0854), "no_undecided": s.undecided == 0},
              f"{ci(s)}, capped {s.hit_nmax_fraction:.4%}, bias bound {s.bias_bound:.2e}")


def test_criterion_4_euler(criterion):
    a = price("euler-fa", 100_000, 4, delta=1 / 160)
    b = price("euler-fb", 10_000, 4, delta=1e-3)
    c = price("euler-fc", 100_000, 4, delta=1 / 160)
    criterion(4, "Euler baselines overlap their reference intervals",
              {"fa": overlaps(a, 0.0680, 0.0689), "fb": overlaps(b, 0.0106, 0.0116),
               "fc": overlaps(c, 0.0846, 0.0858)},
              f"fa {ci(a)}; fb {ci(b)}; fc {ci(c)}")


def test_criterion_5_series(criterion):
    rng = np.random.default_rng(5)
    n_cases, depth = 100_000, 50
    mono = scale = one_sided = True
    for _ in range(n_cases):
        l = math.exp(rng.uniform(-5, 3))
        L = rng.uniform(-3, 1)
        U = L + math.exp(rng.uniform(-3, 1.5))
        x, y = rng.uniform(L, U, 2)
        prev = (0.0, 1.0)
        for n in range(1, depth + 1):
            lo, hi = zeta_level(L, U, l, x, y, n)
            if not (prev[0] <= lo <= hi <= prev[1]):
                mono = False
            prev = lo, hi
        c = math.exp(rng.uniform(-2, 2))
        ref = zeta_level(L, U, l, x, y, 20)
        scaled = zeta_level(c * L, c * U, c * c * l, c * x, c * y, 20)
        if max(abs(ref[0] - scaled[0]), abs(ref[1] - scaled[1])) > 1e-12:
            scale = False
        far = min(x, y) - 40 * math.sqrt(l)
        lo, hi = zeta_level(far, U, l, x, y, 3)
        p = math.exp(-2 * (U - x) * (U - y) / l)
        if not (lo - 1e-15 <= p <= hi + 1e-15):
            one_sided = False
    criterion(5, "series suite on 1e5 random cases",
              {"monotone_n_le_50": mono, "scaling_1e-12": scale, "one_sided_limit": one_sided})


MIDPOINT_CONTEXTS = [
    (ExtremaRanges(-1.2, -0.4, 0.6, 1.5), 0.5, 0.5, 0.0, 0.2),
    (ExtremaRanges(-0.55, -0.3, 0.4, 0.65), 0.25, 0.75, -0.1, 0.2),
    (ExtremaRanges(-3.0, -0.01, 0.01, 3.0), 0.5, 0.5, 0.0, 0.0),
    (ExtremaRanges(-0.9, -0.5, 0.3, 0.7), 0.125, 0.125, -0.2, 0.1),
    (ExtremaRanges(-2.5, -1.0, 1.6, 3.0), 2.0, 2.0, -0.4, 1.5),
]


def within_3se(count, n, p):
    return abs(count / n - p) <= 3 * math.sqrt(p * (1 - p) / n) if 0 < p < 1 else count == round(p * n)


def test_criterion_6_samplers(criterion):
    N = 100_000
    checks, notes = {}, []
    for k, (ranges, q, r, x, y) in enumerate(MIDPOINT_CONTEXTS):
        ws = sample_midpoints(ranges, q, r, x, y, N, stream(6, k))
        grid, cdf = midpoint_cdf_table(ranges, q, r, x, y)
        d = ks_against_table(ws, grid, cdf)
        checks[f"midpoint_ks_{k}"] = d < 0.01
        notes.append(f"KS{k}={d:.4f}")

    rng = stream(6, 100)
    ranges = MIDPOINT_CONTEXTS[0][0]
    for w in (0.1, -0.7):
        q, r, x, y = 0.5, 0.5, 0.0, 0.2
        ws_ = np.array([b.limit() for b in e_weight_bounds(ranges, q, r, x, w, y)])
        p = ws_ / ws_.sum()
        counts = np.bincount([sample_E(ranges, q, r, x, w, y, rng).index - 1 for _ in range(N)], minlength=9)
        checks[f"E_w={w}"] = all(within_3se(c, N, pi) for c, pi in zip(counts, p))

    layer = IntersectionLayer(0.0, 1.0, 0.0, 0.2, *ranges)
    Ld, Lu, Ud, Uu = ranges
    parent = beta_ref(Ld, Lu, Ud, Uu, 1.0, 0.0, 0.2)
    for which, outer in (("max", beta_ref(Ld, Lu, 0.5 * (Ud + Uu), Uu, 1.0, 0.0, 0.2)),
                         ("min", beta_ref(Ld, 0.5 * (Ld + Lu), Ud, Uu, 1.0, 0.0, 0.2))):
        k = sum(refine_bernoulli(layer, which, rng) for _ in range(N))
        checks[f"refine_{which}"] = within_3se(k, N, outer / parent)

    for x0, t in ((0.0, 0.5), (1.2, 0.25)):
        ys = sample_transitions(x0, t, N, stream(6, 200 + int(10 * x0)))
        chi2, dof = binned_chi2(ys, lambda v: tan_density(x0, v, t), -HALF_PI, HALF_PI, bins=50)
        pv = stats.chi2.sf(chi2, dof)
        checks[f"tan_{x0}_{t}"] = pv > 0.01
        notes.append(f"tan({x0},{t}) p={pv:.3f}")
    criterion(6, "sampler exactness suite", checks, ", ".join(notes))


def test_criterion_7_dominating_paths(criterion):
    sandwich = monotone = True
    l1 = np.zeros(9)
    u = np.linspace(0.0, 1.0, 2049)
    for seed in range(100):
        rng = stream(7, seed)
        part, hist = run(0.0, rng.normal(), 8, rng)
        pts = np.append(part.s, 1.0)
        vals = np.append(part.rows[:, 2], part.rows[-1, 3])
        prev = None
        gaps = []
        for dom in hist:
            lo, hi = dom.evaluate(pts)
            lo_l, hi_l = dom.evaluate(np.maximum(pts - 1e-12, 0.0))
            if np.any(np.minimum(lo, lo_l) > vals) or np.any(np.maximum(hi, hi_l) < vals):
                sandwich = False
            cur = dom.evaluate(u)
            if prev is not None and (np.any(cur[0] < prev[0]) or np.any(cur[1] > prev[1])):
                sandwich = False
            prev = cur
            m = gap_metrics(dom)
            gaps.append((m["sup_gap"], m["l1_gap"]))
        g = np.array(gaps)
        if np.any(np.diff(g, axis=0) > 0):
            monotone = False
        l1 += g[:, 1]
    slope = np.polyfit(np.arange(2, 9), np.log2(l1[2:] / 100), 1)[0]
    criterion(7, "dominating paths: sandwich, gap slope -0.5 +- 0.15, monotone gaps",
              {"sandwich": sandwich, "slope": abs(slope + 0.5) <= 0.15, "monotone_gaps": monotone},
              f"slope {slope:.3f}")


class Bracketed:
    """A constant functional revealed through a bracket that halves each step."""

    def __init__(self, value, half_width):
        self.value, self.lower, self.upper = value, value - half_width, value + half_width
        self.generation = 0

    def step(self):
        self.generation += 1
        self.lower = self.value - (self.value - self.lower) / 2
        self.upper = self.value + (self.upper - self.value) / 2


def test_criterion_8_estimators(criterion):
    N = 100_000
    ctx = map_gbm(MarketParams(), "a")
    vals = {"exp": np.empty(N), "unif": np.empty(N)}
    for name, seed in (("exp", 80), ("unif", 81)):
        for i in range(N):
            rng = stream(seed, i)
            layer = draw_terminal_and_gate(ctx, rng)
            if layer is None:
                vals[name][i] = 0.0
                continue
            b = BOUNDERS["a"](layer, ctx, rng)
            rec = estimate_exponential(b, rng) if name == "exp" else estimate_uniform_improved(b, rng)
            vals[name][i] = rec.value
    m = {k: v.mean() for k, v in vals.items()}
    se = math.sqrt(sum(v.var(ddof=1) / N for v in vals.values()))
    agree = abs(m["exp"] - m["unif"]) <= 3 * se

    # exponential trick on F = c: atom e^-c at 0, else CDF (1 - 1/v) / (1 - e^-c) on [1, e^c]
    c = 1.0
    rng = stream(8, 0)
    ev = np.array([estimate_exponential(ConstantBounder(c), rng).value for _ in range(N)])
    probs_pos = (1 - math.exp(-c)) / 10
    edges = 1 / (1 - np.arange(11) / 10 * (1 - math.exp(-c)))
    obs = np.append((ev == 0).sum(), np.histogram(ev[ev > 0], edges)[0])
    exp_counts = N * np.append(math.exp(-c), np.full(10, probs_pos))
    p_exp = stats.chisquare(obs, exp_counts).pvalue

    # uniform-improved with the bracket centred on c: upper or lower with probability 1/2
    b0 = Bracketed(0.4, 0.1)
    uv = np.array([estimate_uniform_improved(Bracketed(0.4, 0.1), rng, n0=0, n_max=60).value
                   for _ in range(N)])
    obs_u = np.array([(uv == b0.upper).sum(), (uv == b0.lower).sum()])
    p_unif = stats.chisquare(obs_u, [N / 2, N / 2]).pvalue if obs_u.sum() == N else 0.0
    criterion(8, "estimator consistency and constant-functional laws",
              {"fa_agree_3se": agree, "exp_law": p_exp > 0.01, "unif_law": p_unif > 0.01},
              f"exp {m['exp']:.5f}, unif {m['unif']:.5f}, 3se {3 * se:.5f}, "
              f"chi2 p {p_exp:.3f}/{p_unif:.3f}")


def test_criterion_9_determinism(criterion, tmp_path):
    same = {}
    for exp, n in (("fa", 2000), ("fb", 200)):
        a, b = tmp_path / f"{exp}1.csv", tmp_path / f"{exp}8.csv"
        args = ["--experiment", exp, "--samples", str(n), "--seed", "9"]
        main([*args, "--workers", "1", "--out", str(a)])
        main([*args, "--workers", "8", "--out", str(b)])
        same[exp] = a.read_bytes() == b.read_bytes()
    criterion(9, "byte-identical per-sample output with 1 and 8 workers", same)
