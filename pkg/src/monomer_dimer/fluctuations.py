"""Exact finite-N law of the monomer number on the complete graph.

Dimer weight 1/N, monomer activity e^h and imitation J/N on every edge. The
Gibbs weight depends on the configuration only through the monomer count M,
so the law of M is a one-dimensional pmf computed exactly in log-space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import gammainc, gammaln, logsumexp
from scipy.stats import norm

from . import meanfield as mf
from .reference import ReferenceValues

MAX_N = 10_000_000


class NotOnCoexistenceError(ValueError):
    pass


@dataclass(frozen=True)
class FiniteNPmf:
    N: int
    support: np.ndarray  # monomer counts, same parity as N, ascending
    logw: np.ndarray

    @property
    def log_z(self) -> float:
        return float(logsumexp(self.logw))

    def probabilities(self) -> np.ndarray:
        p = np.exp(self.logw - self.logw.max())
        return p / math.fsum(p)

    def mean_density(self) -> float:
        return float(np.dot(self.probabilities(), self.support) / self.N)


def log_config_count(N: int, M) -> np.ndarray:
    """log of N! / (M! D! 2^D), the number of matchings of K_N with D = (N-M)/2 dimers."""
    M = np.asarray(M, dtype=float)
    D = (N - M) / 2
    return gammaln(N + 1) - gammaln(M + 1) - gammaln(D + 1) - D * math.log(2)


def exact_pmf(N: int, h: float, J: float = 0.0) -> FiniteNPmf:
    if not 1 <= N <= MAX_N:
        raise ValueError(f"N must be in [1, {MAX_N}]")
    M = np.arange(N % 2, N + 1, 2)
    D = (N - M) // 2
    logw = log_config_count(N, M) - D * math.log(N) + h * M
    if J:
        pairs = (M * (M - 1) + (N - M) * (N - M - 1)) / 2
        logw = logw + (J / N) * pairs
    return FiniteNPmf(N, M, logw)


def finite_pressure(N: int, h: float, J: float = 0.0) -> float:
    return exact_pmf(N, h, J).log_z / N


def laplace_refinement_check(N: int, h: float) -> tuple[float, float, float]:
    """(Z_N e^{-N p0(h)}, its limit 1/sqrt(2 - g(h)), their ratio) at J = 0."""
    val = math.exp(exact_pmf(N, h).log_z - N * mf.p0(h))
    target = 1.0 / math.sqrt(2.0 - mf.g(h))
    return val, target, val / target


# ----------------------------------------------------------- law of large numbers


@dataclass(frozen=True)
class LLNReport:
    classification: str
    maximizers: tuple
    outside_mass: float | None = None  # uniqueness region
    basin_masses: tuple | None = None  # coexistence
    weights: tuple | None = None
    split: float | None = None


def mixture_weights(h: float, J: float, analysis: mf.PsiAnalysis | None = None) -> tuple[float, float]:
    """rho_l = b_l / (b_1 + b_2) with b_l = (-lambda_l (2 - m_l))^{-1/2}."""
    a = analysis or mf.analyze(h, J)
    if a.classification != "coexistence":
        raise NotOnCoexistenceError(f"(h, J) = ({h}, {J}) is not on the coexistence curve")
    b = [(-lam * (2.0 - m)) ** -0.5 for m, lam in zip(a.maximizers, a.lambda2)]
    return b[0] / (b[0] + b[1]), b[1] / (b[0] + b[1])


def lln_check(N: int, h: float, J: float, eps: float = 0.05) -> LLNReport:
    a = mf.analyze(h, J)
    pmf = exact_pmf(N, h, J)
    p = pmf.probabilities()
    dens = pmf.support / N
    if a.classification != "coexistence":
        m = a.maximizers[0]
        out = math.fsum(p[np.abs(dens - m) > eps])
        return LLNReport(a.classification, a.maximizers, outside_mass=out)
    m1, m2 = a.maximizers
    inner = [m for m in a.stationary if m1 < m < m2]
    split = inner[0] if inner else 0.5 * (m1 + m2)
    lo = math.fsum(p[dens < split])
    return LLNReport(
        a.classification,
        a.maximizers,
        basin_masses=(lo, 1.0 - lo),
        weights=mixture_weights(h, J, a),
        split=split,
    )


# ---------------------------------------------------------------- limit laws


def quartic_normaliser(lam: float) -> float:
    """C with C * integral exp(lam x^4 / 24) dx = 1, lam < 0."""
    a = -lam / 24.0
    return 1.0 / (0.5 * a**-0.25 * math.gamma(0.25))


def quartic_pdf(x, lam: float):
    return quartic_normaliser(lam) * np.exp(lam * np.asarray(x, dtype=float) ** 4 / 24.0)


def quartic_cdf(x, lam: float):
    """CDF of C exp(lam x^4 / 24) through the regularised incomplete gamma:
    integral_0^x exp(-a u^4) du = a^{-1/4} gamma_inc(1/4, a x^4) / 4."""
    if lam >= 0:
        raise ValueError("lambda must be negative")
    x = np.asarray(x, dtype=float)
    a = -lam / 24.0
    out = 0.5 + 0.5 * np.sign(x) * gammainc(0.25, a * x**4)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LimitLaw:
    kind: str  # point-mass | two-point mixture | gaussian | quartic
    params: dict

    def __post_init__(self):
        p = self.params
        if self.kind == "gaussian" and not p["sigma2"] > 0:
            raise ValueError("sigma^2 must be positive")
        if self.kind == "quartic" and not p["lambda_c"] < 0:
            raise ValueError("lambda_c must be negative")
        if self.kind == "two-point mixture" and abs(p["rho1"] + p["rho2"] - 1) > 1e-12:
            raise ValueError("mixture weights must sum to 1")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "point-mass":
            return (x >= p["m"]).astype(float)
        if self.kind == "two-point mixture":
            return p["rho1"] * (x >= p["m1"]) + p["rho2"] * (x >= p["m2"])
        if self.kind == "gaussian":
            return norm.cdf(x, scale=math.sqrt(p["sigma2"]))
        if self.kind == "quartic":
            return quartic_cdf(x, p["lambda_c"])
        raise ValueError(f"unknown limit law {self.kind}")


def clt_variance(h: float, J: float) -> float:
    """Limit variance of (M - N m*)/sqrt(N): g'(h) at J = 0, otherwise
    -1/lambda - 1/(2J) with lambda = psi''(m*)."""
    a = mf.analyze(h, J)
    if a.classification != "unique":
        raise ValueError(f"CLT needs a unique non-critical maximiser, got {a.classification}")
    if J == 0:
        s2 = mf.g_derivative(h, 1)
    else:
        s2 = -1.0 / a.lambda2[0] - 1.0 / (2.0 * J)
    if not s2 > 0:
        raise ArithmeticError(f"non-positive limit variance {s2} at (h, J) = ({h}, {J})")
    return float(s2)


def kolmogorov_distance(x: np.ndarray, p: np.ndarray, cdf) -> float:
    """sup |F_emp - F| for a discrete law with atoms x (ascending) and masses
    p against a continuous CDF; the sup sits at an atom, on one side of the jump."""
    F = cdf(x)
    after = np.cumsum(p)
    before = after - p
    return float(max(np.max(np.abs(F - before)), np.max(np.abs(F - after))))


@dataclass(frozen=True)
class CLTReport:
    N: int
    m_star: float
    sigma2: float
    distance: float


def clt_check(N: int, h: float, J: float) -> CLTReport:
    m = mf.analyze(h, J).m_star
    s2 = clt_variance(h, J)
    pmf = exact_pmf(N, h, J)
    x = (pmf.support - N * m) / math.sqrt(N)
    law = LimitLaw("gaussian", {"sigma2": s2})
    return CLTReport(N, m, s2, kolmogorov_distance(x, pmf.probabilities(), law.cdf))


@dataclass(frozen=True)
class CriticalReport:
    N: int
    quartic_distance: float
    gaussian_distance: float  # control at scale sqrt(N), moment-matched
    gaussian_sigma2: float


def critical_scaling_check(N: int, ref: ReferenceValues) -> CriticalReport:
    """Kolmogorov distance of (M - N m_c)/N^{3/4} to the quartic law.

    Also reports the distance of (M - N m_c)/sqrt(N) to the Gaussian with the
    same mean and variance (the wrong scale, kept as a control). Constants come
    from ``ref``.
    """
    if not isinstance(ref, ReferenceValues):
        raise TypeError("critical checks need a ReferenceValues document")
    pmf = exact_pmf(N, ref.h_c, ref.J_c)
    p = pmf.probabilities()
    shift = pmf.support - N * ref.m_c
    xq = shift / N**0.75
    dq = kolmogorov_distance(xq, p, LimitLaw("quartic", {"lambda_c": ref.lambda_c}).cdf)
    xg = shift / math.sqrt(N)
    mu = float(np.dot(p, xg))
    var = float(np.dot(p, (xg - mu) ** 2))
    dg = kolmogorov_distance(xg, p, lambda x: norm.cdf(x, loc=mu, scale=math.sqrt(var)))
    return CriticalReport(N, dq, dg, var)


def cdf_table(N: int, h: float, J: float, centre: float, scale_exp: float, law: LimitLaw):
    """Rows (x, empirical CDF, limit CDF) for plotting."""
    pmf = exact_pmf(N, h, J)
    x = (pmf.support - N * centre) / N**scale_exp
    return x, np.cumsum(pmf.probabilities()), law.cdf(x)


# ------------------------------------------------------------- convolution


def convolution_scaling_density(N: int, h: float, J: float, eta: float, u: float, x) -> np.ndarray:
    """C_N exp(N p~_N(x / N^eta + u)) on the grid ``x``.

    p~_N(y) = -J y^2 + J/2 + p0_N(2 J y + h - J) with p0_N the finite-N
    pressure at J = 0. C_N normalises the values to unit trapezoid mass on
    the grid.
    """
    if not 0 <= eta <= 1:
        raise ValueError("eta must be in [0, 1]")
    x = np.asarray(x, dtype=float)
    y = x / N**eta + u
    p0n = np.array([finite_pressure(N, 2 * J * yy + h - J) for yy in y])
    log_f = N * (-J * y * y + J / 2 + p0n)
    f = np.exp(log_f - log_f.max())
    return f / trapezoid(f, x)


def p_tilde_n(N: int, h: float, J: float, y) -> np.ndarray:
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return np.array([-J * v * v + J / 2 + finite_pressure(N, 2 * J * v + h - J) for v in y])
