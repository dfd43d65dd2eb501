"""Self-contained numeric verification suites.

Each check re-derives a quantity the library computes in closed form
through an independent route (dense-grid maximization, partial sums,
exhaustive enumeration, cross-module identities) and compares. The
suites back the ``verify`` CLI subcommand and double as oracles for
the acceptance tests.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .counts import CountProfile
from .generators import GeneratorSpec, expected_mk, sample
from .invariants import Mode, TestKind, bound_mean, statistic
from .numerics import (
    log_binomial_pmf,
    log_cn,
    log_normal_sf,
    log_poisson_pmf,
    log_ratio_poisson_binomial,
    normal_cdf,
    normal_quantile,
    stirling_factor,
)

__all__ = ["CheckResult", "SUITES", "run_checks", "exact_d2_moments"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str


def exact_d2_moments(theta1: float, n: int) -> tuple[np.ndarray, dict[str, float]]:
    """Exhaustive two-category moments: enumerate all 2^n sequences.

    Returns exact E[M_k] (array indexed by k, entry 0 unused) and the
    exact expectation of every linear statistic in multinomial mode at
    every k the mode admits. Pure enumeration; shares nothing with the
    closed-form bound code it is used to cross-check.
    """
    if not 0.0 < theta1 < 1.0:
        raise ValueError("theta1 must lie strictly in (0, 1)")
    if not 1 <= n <= 16:
        raise ValueError("enumeration is meant for small n")
    kinds = []
    for k in range(1, n):
        kinds.append(TestKind("count", k))
    for k in range(2, n):
        kinds.extend(
            [TestKind("slope", k), TestKind("slopelower", k), TestKind("curv", k)]
        )
    kinds.extend([TestKind("even"), TestKind("odd")])
    e_mk = np.zeros(n + 1)
    e_t = {str(kind): 0.0 for kind in kinds}
    for seq in itertools.product((1, 2), repeat=n):
        c1 = seq.count(1)
        weight = theta1**c1 * (1.0 - theta1) ** (n - c1)
        counts = [c for c in (c1, n - c1) if c > 0]
        mult: dict[int, int] = {}
        for c in counts:
            mult[c] = mult.get(c, 0) + 1
        profile = CountProfile(n, mult)
        for k, mk in mult.items():
            e_mk[k] += weight * mk
        for kind in kinds:
            e_t[str(kind)] += weight * statistic(kind, profile, Mode.MULTINOMIAL)
    return e_mk, e_t


def _check_stirling() -> tuple[bool, str]:
    prev = 0.0
    for k in range(1, 100001):
        value = stirling_factor(k)  # bracket asserted inside
        if not prev < value < 1.0:
            return False, f"not increasing toward 1 at k={k}"
        prev = value
    return True, "bracket and monotonicity hold for k=1..1e5"


def _check_pmf_normalization() -> tuple[bool, str]:
    # each term exponentiates a log with O(scale ln scale) cancellation,
    # so the mass can only sum to 1 within eps * scale, not to 1e-12 flat
    worst = 0.0
    for n in (1, 2, 7, 100, 1500):
        for theta in (0.0, 1e-6, 0.2, 0.5, 0.9, 1.0):
            total = math.fsum(
                math.exp(log_binomial_pmf(k, n, theta)) for k in range(n + 1)
            )
            gap = abs(total - 1.0)
            worst = max(worst, gap)
            if gap > 1e-12 + 5e-15 * n:
                return False, f"binomial mass at n={n}, theta={theta} sums to {total}"
    for lam in (0.0, 1e-9, 0.4, 3.0, 80.0, 1e4):
        top = int(lam + 40.0 * math.sqrt(lam) + 50.0)
        total = math.fsum(math.exp(log_poisson_pmf(k, lam)) for k in range(top))
        gap = abs(total - 1.0)
        worst = max(worst, gap)
        if gap > 1e-12 + 5e-15 * lam:
            return False, f"poisson mass at lam={lam} sums to {total}"
    return True, f"binomial and poisson masses sum to 1 (worst gap {worst:.1e})"


def _check_normal_tail() -> tuple[bool, str]:
    # deep-tail anchors frozen from a 40-digit erfc evaluation
    anchors = {5.0: -15.06499839398872573608, 40.0: -804.6084420137537881666}
    for y, expect in anchors.items():
        got = log_normal_sf(y)
        if abs(got - expect) > 1e-10 * abs(expect):
            return False, f"log tail at y={y}: {got} vs {expect}"
    for y in np.linspace(-6.0, 6.0, 61):
        if abs(normal_cdf(y) + normal_cdf(-y) - 1.0) > 1e-14:
            return False, f"cdf symmetry broken at y={y}"
        # the tail side keeps full relative resolution at every depth
        if abs(normal_quantile(normal_cdf(-abs(y))) + abs(y)) > 1e-9:
            return False, f"tail quantile round trip off at y={y}"
    for y in np.linspace(-4.5, 4.5, 31):
        # near p = 1 the quantile amplifies the half-ulp of the cdf by
        # 1/pdf(y), which passes 1e-9 beyond |y| of about 5.2, so the
        # near-one side is only checked where it is well conditioned
        if abs(normal_quantile(normal_cdf(y)) - y) > 1e-9:
            return False, f"quantile round trip off at y={y}"
    return True, "tail anchors, symmetry and quantile round trips hold"


def _check_cn_factor() -> tuple[bool, str]:
    if log_cn(1) != 1.0:
        return False, f"log c_1 = {log_cn(1)} != 1"
    # c_n = sqrt(2 pi n) / stirling_factor(n): two independent formulas
    for n in (1, 2, 10, 137, 10**4, 10**6):
        lhs = log_cn(n)
        rhs = 0.5 * math.log(2.0 * math.pi * n) - math.log(stirling_factor(n))
        if abs(lhs - rhs) > 1e-9:
            return False, f"c_n identity off at n={n}: {lhs} vs {rhs}"
    return True, "log c_1 = 1 and c_n matches sqrt(2 pi n)/(1 - eps_n)"


def _check_poisson_binomial_regime() -> tuple[bool, str]:
    n = 10**6
    worst = 0.0
    for theta in (1e-7, 1e-6, 3e-6, 1e-5, 3e-5):
        for k in range(0, 31):
            gap = abs(math.exp(log_ratio_poisson_binomial(k, n, theta)) - 1.0)
            worst = max(worst, gap)
    ok = worst <= 0.01
    return ok, f"max |poisson/binomial - 1| = {worst:.3e} over k<=30, theta<=3e-5"


def _check_central_binomial() -> tuple[bool, str]:
    exact = math.exp(log_binomial_pmf(500, 1000, 0.5))
    approx = math.sqrt(2.0 / (math.pi * 1000.0))
    gap = abs(exact - approx) / approx
    return gap < 0.002, f"central mass {exact:.8f} vs sqrt(2/(pi n)) {approx:.8f} ({gap:.2e})"


def _grid_sup(f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float) -> float:
    # two-stage dense grid; plenty for the smooth unimodal envelopes here
    grid = np.linspace(lo, hi, 200001)
    values = f(grid)
    i = int(np.argmax(values))
    lo2, hi2 = grid[max(i - 2, 0)], grid[min(i + 2, grid.size - 1)]
    fine = np.linspace(lo2, hi2, 20001)
    return float(np.max(f(fine)))


def _pois(k: int, lam: np.ndarray) -> np.ndarray:
    return np.exp(k * np.log(lam) - lam - gammaln(k + 1))


def _check_poisson_envelopes() -> tuple[bool, str]:
    problems = []
    for k in range(2, 9):
        cases = {
            str(TestKind("count", k)): (
                lambda lam, k=k: _pois(k, lam) / lam,
                bound_mean(TestKind("count", k), 1),
            ),
            str(TestKind("slope", k)): (
                lambda lam, k=k: (_pois(k, lam) - _pois(k - 1, lam)) / lam,
                bound_mean(TestKind("slope", k), 1),
            ),
            str(TestKind("slopelower", k)): (
                lambda lam, k=k: (_pois(k - 1, lam) - _pois(k, lam)) / lam,
                bound_mean(TestKind("slopelower", k), 1),
            ),
            str(TestKind("curv", k)): (
                lambda lam, k=k: (2 * _pois(k, lam) - _pois(k - 1, lam) - _pois(k + 1, lam)) / lam,
                bound_mean(TestKind("curv", k), 1),
            ),
        }
        for label, (env, closed) in cases.items():
            sup = _grid_sup(env, 1e-9, 8.0 * k)
            if sup > closed * (1.0 + 1e-9):
                problems.append(f"{label}: sup {sup} exceeds bound {closed}")
            elif closed > sup * (1.0 + 1e-6):
                problems.append(f"{label}: bound {closed} loose vs sup {sup}")
    if problems:
        return False, "; ".join(problems[:3])
    return True, "per-item poisson bounds equal their envelope suprema (k=2..8)"


def _fbin(k: int, n: int, th: np.ndarray) -> np.ndarray:
    return np.exp(
        gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
        + k * np.log(th) + (n - k) * np.log1p(-th)
    )


def _check_multinomial_envelopes() -> tuple[bool, str]:
    problems = []
    for n in (8, 30, 200):
        for k in sorted({2, 3, 5, n - 1}):
            if not 2 <= k < n:
                continue
            count_env = lambda th, k=k, n=n: _fbin(k, n, th) / th
            slope_env = lambda th, k=k, n=n: (_fbin(k, n, th) - _fbin(k - 1, n, th)) / th
            lower_env = lambda th, k=k, n=n: (_fbin(k - 1, n, th) - _fbin(k, n, th)) / th
            curv_env = lambda th, k=k, n=n: (
                2 * _fbin(k, n, th) - _fbin(k - 1, n, th) - _fbin(k + 1, n, th)
            ) / th
            exact = {
                "count": (count_env, bound_mean(TestKind("count", k), n, Mode.MULTINOMIAL)),
                "slope": (slope_env, bound_mean(TestKind("slope", k), n, Mode.MULTINOMIAL)),
                "slopelower": (
                    lower_env,
                    bound_mean(TestKind("slopelower", k), n, Mode.MULTINOMIAL),
                ),
            }
            for fam, (env, closed) in exact.items():
                sup = _grid_sup(env, 1e-9, 1.0 - 1e-9)
                if sup > closed * (1.0 + 1e-9) or closed > sup * (1.0 + 1e-5):
                    problems.append(f"{fam}:{k} n={n}: bound {closed} vs sup {sup}")
            curv_closed = bound_mean(TestKind("curv", k), n, Mode.MULTINOMIAL)
            curv_sup = _grid_sup(curv_env, 1e-9, 1.0 - 1e-9)
            # the curvature bound dominates its envelope without being tight
            if curv_sup > curv_closed * (1.0 + 1e-9):
                problems.append(f"curv:{k} n={n}: sup {curv_sup} exceeds bound {curv_closed}")
    if problems:
        return False, "; ".join(problems[:3])
    return True, "multinomial bounds match (count/slope) or dominate (curv) envelope suprema"


def _check_even_odd_envelopes() -> tuple[bool, str]:
    # closed tail sums: sum over even k>=2 of k pois(k) = (lam/2)(1 - e^(-2 lam)),
    # odd k>=3: (lam/2)(1 - e^(-lam))^2; both over lam stay below lam/2
    for lam in (1e-3, 0.3, 1.0, 3.0, 7.0, 30.0):
        even_direct = sum(
            k * math.exp(log_poisson_pmf(k, lam)) for k in range(2, int(lam + 40 * lam**0.5) + 60, 2)
        )
        odd_direct = sum(
            k * math.exp(log_poisson_pmf(k, lam)) for k in range(3, int(lam + 40 * lam**0.5) + 61, 2)
        )
        even_closed = 0.5 * lam * (1.0 - math.exp(-2.0 * lam))
        odd_closed = 0.5 * lam * (1.0 - math.exp(-lam)) ** 2
        if abs(even_direct - even_closed) > 1e-12 * max(1.0, lam):
            return False, f"even tail sum mismatch at lam={lam}"
        if abs(odd_direct - odd_closed) > 1e-12 * max(1.0, lam):
            return False, f"odd tail sum mismatch at lam={lam}"
        if even_closed > 0.5 * lam or odd_closed > 0.5 * lam:
            return False, f"half-bound violated at lam={lam}"
    return True, "even/odd tail sums match closed forms and stay below lam/2"


def _check_brute_force_d2() -> tuple[bool, str]:
    worst_gap = 0.0
    for n in range(2, 9):
        for theta1 in np.arange(0.1, 0.95, 0.1):
            e_mk, e_t = exact_d2_moments(float(theta1), n)
            expect = expected_mk(np.array([theta1, 1.0 - theta1]), n, n)
            gap = float(np.max(np.abs(e_mk[1:] - expect[1:])))
            worst_gap = max(worst_gap, gap)
            if gap > 1e-12:
                return False, f"expected_mk off by {gap:.2e} at n={n}, theta={theta1:.1f}"
            for token, value in e_t.items():
                kind = TestKind(*_split(token))
                tau = bound_mean(kind, n, Mode.MULTINOMIAL)
                if value > tau + 1e-12:
                    return False, f"E[{token}] = {value} exceeds tau_ub = {tau} at n={n}"
    return True, f"enumeration matches expected_mk (max gap {worst_gap:.1e}) and respects bounds"


def _split(token: str) -> tuple[str, int | None]:
    name, sep, k = token.partition(":")
    return (name, int(k)) if sep else (name, None)


def _check_sampler_determinism() -> tuple[bool, str]:
    spec = GeneratorSpec(kind="linear", n=500, d=40, corruption="no_empty", seed=905)
    a, b = sample(spec), sample(spec)
    if a != b:
        return False, "same spec gave different profiles"
    c = sample(GeneratorSpec(kind="linear", n=500, d=40, corruption="no_empty", seed=906))
    if a == c:
        return False, "distinct seeds collided"
    return True, "profiles are a pure function of the spec"


SUITES: dict[str, Callable[[], tuple[bool, str]]] = {
    "stirling": _check_stirling,
    "pmf-normalization": _check_pmf_normalization,
    "normal-tail": _check_normal_tail,
    "cn-factor": _check_cn_factor,
    "poisson-binomial-regime": _check_poisson_binomial_regime,
    "central-binomial": _check_central_binomial,
    "poisson-envelopes": _check_poisson_envelopes,
    "multinomial-envelopes": _check_multinomial_envelopes,
    "even-odd-envelopes": _check_even_odd_envelopes,
    "brute-force-d2": _check_brute_force_d2,
    "sampler-determinism": _check_sampler_determinism,
}


def run_checks(names: list[str] | None = None) -> list[CheckResult]:
    """Run the named suites (all when names is None)."""
    selected = list(SUITES) if names is None else names
    results = []
    for name in selected:
        if name not in SUITES:
            raise ValueError(f"unknown suite {name!r}; options: {', '.join(SUITES)}")
        ok, detail = SUITES[name]()
        results.append(CheckResult(name, ok, detail))
    return results
