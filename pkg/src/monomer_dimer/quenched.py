"""Quenched models: Erdos-Renyi cavity recursion and random monomer fields.

Erdos-Renyi graphs G(N, c/N) with unit dimer weights and uniform monomer
activity x are handled by population dynamics on the distributional
recursion M = x^2 / (x^2 + sum_{i <= Delta} M_i), Delta ~ Poisson(c).
Complete graphs with dimer weight w/N and i.i.d. activities x_i reduce to a
one-dimensional variational principle.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.optimize import brentq

from .graph_core import Graph, MDModel, partition_hl

POP_CHUNK = 1 << 15
MIN_POP = 1000
GH_NODES = 64


def _rng(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))


# ------------------------------------------------------ activity distributions


@dataclass(frozen=True)
class ActivityDistribution:
    """Law of the i.i.d. monomer activities; support strictly positive.

    kind is one of ``degenerate`` (x,), ``twopoint`` (x1, x2, p) with
    P(x1) = p, ``lognormal`` (mu, sigma) for exp(mu + sigma Z), or
    ``empirical`` (a tuple of sample values).
    """

    kind: str
    params: tuple

    def __post_init__(self):
        k, p = self.kind, self.params
        if k == "degenerate":
            ok = len(p) == 1 and p[0] > 0
        elif k == "twopoint":
            ok = len(p) == 3 and p[0] > 0 and p[1] > 0 and 0 <= p[2] <= 1
        elif k == "lognormal":
            ok = len(p) == 2 and p[1] >= 0 and all(map(math.isfinite, p))
        elif k == "empirical":
            ok = len(p) > 0 and all(v > 0 and math.isfinite(v) for v in p)
        else:
            raise ValueError(f"unknown activity distribution {k!r}")
        if not ok:
            raise ValueError(f"invalid parameters {p} for {k} distribution")

    @classmethod
    def parse(cls, spec: str) -> "ActivityDistribution":
        """``degenerate:1.0``, ``twopoint:1,2,0.5``, ``lognormal:0,0.5`` or
        ``empirical:@file.csv`` (one value per line or comma separated)."""
        kind, _, rest = spec.partition(":")
        kind = kind.strip().lower()
        if kind == "empirical":
            if not rest.startswith("@"):
                raise ValueError("empirical distributions are given as empirical:@file")
            text = Path(rest[1:]).read_text().replace(",", " ")
            return cls(kind, tuple(float(v) for v in text.split()))
        return cls(kind, tuple(float(v) for v in rest.split(",") if v.strip()))

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights with E f(x) ~ sum w_k f(x_k)."""
        k, p = self.kind, self.params
        if k == "degenerate":
            return np.array([p[0]]), np.array([1.0])
        if k == "twopoint":
            return np.array([p[0], p[1]]), np.array([p[2], 1 - p[2]])
        if k == "lognormal":
            t, wt = np.polynomial.hermite.hermgauss(GH_NODES)
            return np.exp(p[0] + p[1] * math.sqrt(2.0) * t), wt / math.sqrt(math.pi)
        v = np.array(p)
        return v, np.full(len(v), 1.0 / len(v))

    def expect(self, f) -> float:
        x, wt = self.atoms()
        return float(np.dot(wt, f(x)))

    def mean_inverse(self) -> float:
        if self.kind == "lognormal":
            mu, s = self.params
            return math.exp(-mu + s * s / 2)
        return self.expect(lambda x: 1.0 / x)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        k, p = self.kind, self.params
        if k == "degenerate":
            return np.full(size, p[0])
        if k == "twopoint":
            return np.where(rng.random(size) < p[2], p[0], p[1])
        if k == "lognormal":
            return np.exp(p[0] + p[1] * rng.standard_normal(size))
        return rng.choice(np.array(p), size=size)


# -------------------------------------------------------- population dynamics


@dataclass(frozen=True)
class ERParams:
    c: float
    x: float

    def __post_init__(self):
        if not self.c >= 0:
            raise ValueError("mean degree c must be >= 0")
        if not self.x > 0:
            raise ValueError("monomer activity x must be > 0")


@dataclass(frozen=True)
class Population:
    values: np.ndarray
    generation: int = 0

    def __post_init__(self):
        v = self.values
        if len(v) < MIN_POP:
            raise ValueError(f"population size must be >= {MIN_POP}")
        if v.min() < 0 or v.max() > 1:
            raise ValueError("population values must lie in [0, 1]")

    @classmethod
    def ones(cls, K: int) -> "Population":
        return cls(np.ones(K), 0)

    @property
    def parity(self) -> str:
        return "even" if self.generation % 2 == 0 else "odd"

    def mean_and_stderr(self) -> tuple[float, float]:
        v = self.values
        return float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v)))


def population_step(pop: Population, params: ERParams, seed: int) -> Population:
    """One bulk-synchronous update of the cavity recursion.

    New values only read the previous generation; chunk k of generation t
    draws from the stream keyed by (seed, t, k), so the result does not
    depend on how chunks are scheduled.
    """
    old = pop.values
    K = len(old)
    x2 = params.x**2
    out = np.empty(K)
    for start in range(0, K, POP_CHUNK):
        size = min(POP_CHUNK, K - start)
        rng = _rng(seed, pop.generation, start // POP_CHUNK)
        deg = rng.poisson(params.c, size)
        picks = old[rng.integers(0, K, int(deg.sum()))]
        owner = np.repeat(np.arange(size), deg)
        sums = np.bincount(owner, weights=picks, minlength=size)
        out[start : start + size] = x2 / (x2 + sums)
    return Population(out, pop.generation + 1)


@dataclass(frozen=True)
class DensityResult:
    estimate: float
    stderr: float
    ladder: tuple  # (generation, mean, stderr) for generations 1..r
    ordered: bool  # even/odd bounds bracket each other within 3 stderr


def ladder_ordered(ladder, sigmas: float = 3.0) -> bool:
    """Odd-generation means increase, even ones decrease, and every odd mean
    sits below every even one from generation 3 onwards (within the error)."""
    rows = [r for r in ladder if r[0] >= 3]
    odd = [r for r in rows if r[0] % 2]
    even = [r for r in rows if r[0] % 2 == 0]

    def le(a, b):
        return a[1] <= b[1] + sigmas * math.hypot(a[2], b[2])

    ok = all(le(a, b) for a, b in zip(odd, odd[1:]))
    ok &= all(le(b, a) for a, b in zip(even, even[1:]))
    ok &= all(le(o, e) for o in odd for e in even)
    return bool(ok)


def _run(params: ERParams, r: int, K: int, seed: int) -> tuple[Population, list]:
    if r < 1:
        raise ValueError("r must be >= 1")
    pop = Population.ones(K)
    ladder = []
    for _ in range(r):
        pop = population_step(pop, params, seed)
        ladder.append((pop.generation, *pop.mean_and_stderr()))
    return pop, ladder


def er_monomer_density(params: ERParams, r: int = 6, K: int = 100_000, seed: int = 0) -> DensityResult:
    """Mean of the population after r steps from M = 1, with the bound ladder."""
    _, ladder = _run(params, r, K, seed)
    _, est, se = ladder[-1]
    return DensityResult(est, se, tuple(ladder), ladder_ordered(ladder))


FIG2_XS = (0.01,) + tuple(round(0.1 * k, 1) for k in range(1, 21))
FIG2 = {"c": 2.0, "rs": (3, 4, 5, 6), "K": 10_000, "xs": FIG2_XS}


def fig2_table(xs=FIG2_XS, c: float = 2.0, K: int = 10_000, seed: int = 0) -> list[tuple]:
    """Rows (x, E M(3), E M(4), E M(5), E M(6)) for the bound-ladder preset:
    c = 2, depths 3 to 6, K = 10^4 population members."""
    rows = []
    for x in xs:
        res = er_monomer_density(ERParams(c, x), 6, K, seed)
        rows.append((x,) + tuple(m for g, m, _ in res.ladder if g >= 3))
    return rows


@dataclass(frozen=True)
class PressureResult:
    estimate: float
    stderr: float
    converged: bool
    gap: float  # |E M(r) - E M(r-1)|


def er_pressure(params: ERParams, r: int = 30, K: int = 100_000, seed: int = 0) -> PressureResult:
    """Plug-in estimate of E log(x / M) - (c/2) E log(1 + M1 M2 / x^2).

    M, M1 and M2 are drawn from the final population (M1 and M2 by
    independent resampling). Convergence means consecutive generation means
    agree within 3 combined standard errors.
    """
    pop, ladder = _run(params, max(r, 2), K, seed)
    (_, a, sa), (_, b, sb) = ladder[-2], ladder[-1]
    gap = abs(a - b)
    converged = gap <= 3 * math.hypot(sa, sb)
    if not converged:
        warnings.warn(f"population not converged after {r} steps (gap {gap:.3g})")
    v = pop.values
    rng = _rng(seed, pop.generation, 1 << 20)
    m1 = v[rng.integers(0, len(v), len(v))]
    m2 = v[rng.integers(0, len(v), len(v))]
    x = params.x
    terms = np.log(x / v) - 0.5 * params.c * np.log1p(m1 * m2 / x**2)
    return PressureResult(float(terms.mean()), float(terms.std(ddof=1) / math.sqrt(len(v))), bool(converged), gap)


def erdos_renyi(N: int, p: float, rng: np.random.Generator) -> Graph:
    iu, ju = np.triu_indices(N, 1)
    keep = rng.random(len(iu)) < p
    return Graph.from_edges(N, zip(iu[keep].tolist(), ju[keep].tolist()))


@dataclass(frozen=True)
class OracleResult:
    mean: float
    stderr: float
    std: float
    samples: int


ORACLE_CAP = 16


def er_quenched_oracle(N: int, params: ERParams, samples: int = 500, seed: int = 0) -> OracleResult:
    """Average of (1/N) log Z over sampled G(N, c/N), exact per graph."""
    if N > ORACLE_CAP:
        raise ValueError(f"er_quenched_oracle: N = {N} exceeds cap {ORACLE_CAP}")
    vals = []
    for s in range(samples):
        g = erdos_renyi(N, min(params.c / N, 1.0), _rng(seed, s))
        vals.append(partition_hl(MDModel.uniform(g, 1.0, params.x)) / N)
    v = np.array(vals)
    std = float(v.std(ddof=1)) if samples > 1 else 0.0
    return OracleResult(float(v.mean()), std / math.sqrt(samples), std, samples)


# ---------------------------------------------------------------- random field


def rf_fixed_point(w: float, dist: ActivityDistribution, tol: float = 1e-14) -> float:
    """The unique root of xi = E[w / (xi + x)] on [0, w E[1/x]]."""
    if not w > 0:
        raise ValueError("w must be > 0")
    upper = w * dist.mean_inverse()
    if not math.isfinite(upper):
        raise ValueError("E[1/x] is not finite")
    f = lambda xi: xi - dist.expect(lambda x: w / (xi + x))
    return brentq(f, 0.0, upper, xtol=tol, rtol=4 * np.finfo(float).eps)


def phi(xi: float, w: float, dist: ActivityDistribution) -> float:
    return -xi * xi / (2 * w) + dist.expect(lambda x: np.log(xi + x))


def rf_pressure_and_density(w: float, dist: ActivityDistribution) -> tuple[float, float]:
    """Limiting pressure Phi(xi*) and dimer density xi*^2 / (2w)."""
    xi = rf_fixed_point(w, dist)
    return phi(xi, w, dist), xi * xi / (2 * w)


def _log_abs_integrand(xi, N: int, w: float, x: np.ndarray):
    xi = np.atleast_1d(xi)
    with np.errstate(divide="ignore"):
        return -N * xi**2 / (2 * w) + np.log(np.abs(xi[:, None] + x[None, :])).sum(axis=1)


def rf_partition_quadrature(N: int, w: float, x, cutoff: float = 60.0, epsrel: float = 1e-11) -> float:
    """log of sqrt(N / 2 pi w) * integral exp(-N xi^2 / 2w) prod_i (xi + x_i) dxi.

    The integrand is divided by its peak value on xi > -min x, the window is
    doubled until both tails are below exp(-cutoff) relative to the peak, and
    the window is integrated piecewise between the sign changes at -x_i.
    """
    x = np.asarray(x, dtype=float)
    if len(x) != N:
        raise ValueError("need one activity per vertex")
    if N > 10_000:
        raise ValueError("rf_partition_quadrature: N above 10^4")
    if (x <= 0).any():
        raise ValueError("activities must be > 0")
    # peak of the log-concave part: N xi / w = sum 1 / (xi + x_i)
    lo = -x.min()
    dpos = lambda xi: -N * xi / w + np.sum(1.0 / (xi + x))
    a = lo + 1e-12 * max(1.0, abs(lo))
    while dpos(a) <= 0:
        a = lo + (a - lo) * 1e-3
    b = max(1.0, math.sqrt(w))
    while dpos(b) >= 0:
        b *= 2
    xi_star = brentq(dpos, a, b, xtol=1e-15)
    peak = float(_log_abs_integrand(xi_star, N, w, x)[0])
    s = math.sqrt(w / N)
    W = abs(xi_star) + 10 * s + x.max()
    for _ in range(200):
        ends = _log_abs_integrand(np.array([-W, W]), N, w, x) - peak
        if ends.max() < -cutoff:
            break
        W *= 2
    else:
        raise RuntimeError("integration window did not close")
    f = lambda t: math.copysign(1.0, np.prod(np.sign(t + x))) * math.exp(
        float(_log_abs_integrand(t, N, w, x)[0]) - peak
    )
    cuts = np.unique(np.concatenate(([-W, W, xi_star], -x[(-x > -W) & (-x < W)])))
    pieces = []
    for u, v in zip(cuts[:-1], cuts[1:]):
        grid = np.linspace(u, v, 65)
        lf = _log_abs_integrand(grid, N, w, x) - peak
        if lf.max() < -cutoff:
            continue
        k = int(np.argmax(lf))
        inner = [grid[k]] if 0 < k < 64 else []
        # split at the local peak and at +-5 widths of it so quad sees the bump
        pts = sorted({p for p in inner + [grid[k] - 5 * s, grid[k] + 5 * s] if u < p < v})
        edges = [u] + pts + [v]
        for p, q in zip(edges[:-1], edges[1:]):
            val, err = integrate.quad(f, p, q, epsabs=0.0, epsrel=epsrel, limit=200)
            pieces.append(val)
    total = math.fsum(pieces)
    if not total > 0:
        raise ArithmeticError("quadrature produced a non-positive partition function")
    return peak + math.log(total) + 0.5 * math.log(N / (2 * math.pi * w))


@dataclass(frozen=True)
class SelfAveragingRow:
    N: int
    mean: float
    std: float
    reps: int


def replica_activities(dist: ActivityDistribution, n_max: int, seed: int, rep: int) -> np.ndarray:
    return dist.sample(_rng(seed, rep), n_max)


def self_averaging_experiment(Ns, dist: ActivityDistribution, w: float, reps: int = 30, seed: int = 0) -> list[SelfAveragingRow]:
    """Sample mean and std of p_N = (1/N) log Z over ``reps`` replicas.

    Replica k draws max(Ns) activities from its own stream and uses the
    first N of them at each size.
    """
    Ns = list(Ns)
    if Ns != sorted(Ns):
        raise ValueError("Ns must be ascending")
    if reps < 2:
        raise ValueError("need at least 2 replicas")
    acts = [replica_activities(dist, Ns[-1], seed, k) for k in range(reps)]
    rows = []
    for N in Ns:
        p = np.array([rf_partition_quadrature(N, w, a[:N]) / N for a in acts])
        rows.append(SelfAveragingRow(N, float(p.mean()), float(p.std(ddof=1)), reps))
    return rows
