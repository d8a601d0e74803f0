"""Mean-field imitative monomer-dimer model on the complete graph.

Dimer weight 1/N, monomer activity e^h, imitation coupling J/N. The limiting
pressure is sup_m psi(m) with

    psi(m; h, J) = -J m^2 + J/2 + p0(2 J m + h - J)

and p0, g the closed-form pressure and monomer density at J = 0.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

GRID = 10_000
ROOT_XTOL = 1e-15


class NoCoexistenceError(ValueError):
    pass


# ------------------------------------------------------------ g, p0 and psi


def g(t):
    """Monomer density at J = 0, g(t) = (sqrt(e^{4t} + 4 e^{2t}) - e^{2t}) / 2.

    Evaluated as 2 / (1 + sqrt(1 + 4 e^{-2t})) for t >= 0 and as
    2 e^t / (e^t + sqrt(e^{2t} + 4)) for t < 0; both forms are exact
    rewrites and avoid overflow and cancellation.
    """
    t = np.asarray(t, dtype=float)
    pos = np.where(t >= 0, t, 0.0)
    neg = np.where(t < 0, t, 0.0)
    a = 2.0 / (1.0 + np.sqrt(1.0 + 4.0 * np.exp(-2.0 * pos)))
    e = np.exp(neg)
    b = 2.0 * e / (e + np.sqrt(e * e + 4.0))
    out = np.where(t >= 0, a, b)
    return float(out) if out.ndim == 0 else out


def g_literal(t: float) -> float:
    """Textbook form of g; loses accuracy for large |t|."""
    return 0.5 * (math.sqrt(math.exp(4 * t) + 4 * math.exp(2 * t)) - math.exp(2 * t))


def g_inverse(m):
    """t with g(t) = m, for m in (0, 1): log m - log(1 - m) / 2."""
    m = np.asarray(m, dtype=float)
    out = np.log(m) - 0.5 * np.log1p(-m)
    return float(out) if out.ndim == 0 else out


# g solves g^2 e^{-2t} + g - 1 = 0, so every t-derivative of g is a
# polynomial/rational function of g itself:
#   g'   = G1(g) = 2 g (1 - g) / (2 - g)
#   g''  = G1 G1'
#   g''' = G1 (G1'^2 + G1 G1'')
# with G1'(g) = 2 (g^2 - 4 g + 2) / (2 - g)^2 and G1''(g) = -8 / (2 - g)^3.


def _G1(v):
    return 2.0 * v * (1.0 - v) / (2.0 - v)


def _G1p(v):
    return 2.0 * (v * v - 4.0 * v + 2.0) / (2.0 - v) ** 2


def _G1pp(v):
    return -8.0 / (2.0 - v) ** 3


def g_derivative(t, order: int = 1):
    v = g(t)
    if order == 0:
        return v
    if order == 1:
        return _G1(v)
    if order == 2:
        return _G1(v) * _G1p(v)
    if order == 3:
        return _G1(v) * (_G1p(v) ** 2 + _G1(v) * _G1pp(v))
    raise ValueError("order must be 0..3")


def p0(t):
    """Pressure of the pure model on the complete graph, dp0/dt = g."""
    # 1 - g = g^2 e^{-2t}, so -log(1 - g)/2 = t - log g, finite for all t
    t = np.asarray(t, dtype=float)
    v = g(t)
    with np.errstate(over="ignore"):
        one_minus = np.where(t >= 0, np.square(v) * np.exp(-2.0 * np.maximum(t, 0.0)), 1.0 - v)
    out = t - np.log(v) - 0.5 * one_minus
    return float(out) if np.ndim(out) == 0 else out


def p0_literal(t: float) -> float:
    v = g(t)
    return -0.5 * (1.0 - v) - 0.5 * math.log1p(-v)


def psi(m, h: float, J: float):
    return -J * np.square(m) + J / 2.0 + p0(2.0 * J * np.asarray(m) + h - J)


def psi_derivative(m, h: float, J: float, order: int):
    """Analytic m-derivatives of psi, orders 1 to 4."""
    t = 2.0 * J * np.asarray(m, dtype=float) + h - J
    if order == 1:
        return -2.0 * J * m + 2.0 * J * g(t)
    if order == 2:
        return -2.0 * J + 4.0 * J * J * g_derivative(t, 1)
    if order == 3:
        return 8.0 * J**3 * g_derivative(t, 2)
    if order == 4:
        return 16.0 * J**4 * g_derivative(t, 3)
    raise ValueError("order must be 1..4")


def entropy(m):
    """Entropy density of monomer density m on K_N with dimer weight 1/N.

    (1/N) log[N! / (M! D! 2^D N^D)] with M = mN, D = (1 - m)N/2 tends to
    -m log m - ((1-m)/2) log(1-m) - (1-m)/2. The constant term is the one
    fixed by this count; with it sup (s - e) equals sup psi.
    """
    m = np.asarray(m, dtype=float)
    # boundary values by continuity: 0 log 0 = 0
    a = np.where(m > 0, -m * np.log(np.where(m > 0, m, 1.0)), 0.0)
    b = np.where(m < 1, -(1 - m) / 2 * np.log(np.where(m < 1, 1 - m, 1.0)), 0.0)
    out = a + b - (1 - m) / 2
    return float(out) if out.ndim == 0 else out


def energy(m, h: float, J: float):
    m = np.asarray(m, dtype=float)
    out = -J * m * m - (h - J) * m - J / 2
    return float(out) if out.ndim == 0 else out


def entropy_energy_pressure(m, h: float, J: float):
    """s(m) - e(m), the second variational form of the pressure."""
    return entropy(m) - energy(m, h, J)


def sup_entropy_energy(h: float, J: float, grid: int = 2001) -> float:
    """sup over m in [0, 1] of s - e: grid seed then bounded refinement."""
    from scipy.optimize import minimize_scalar

    ms = np.linspace(0.0, 1.0, grid)
    vals = entropy_energy_pressure(ms, h, J)
    k = int(np.argmax(vals))
    lo, hi = ms[max(k - 1, 0)], ms[min(k + 1, grid - 1)]
    res = minimize_scalar(
        lambda m: -entropy_energy_pressure(m, h, J),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-13},
    )
    return float(max(-res.fun, vals[k]))


# ------------------------------------------------------ consistency equation


def _consistency(m, h, J):
    return m - g((2.0 * m - 1.0) * J + h)


def spinodal_points(J: float) -> tuple[float, ...]:
    """Critical points in (0, 1) of H(m) = g^{-1}(m) - (2m - 1) J.

    Roots of the consistency equation are the solutions of H(m) = h, so H is
    monotone between consecutive returned points.
    """
    if J <= 0:
        return ()
    # H'(m) = 1/m + 1/(2(1-m)) - 2J = 0  <=>  4J m^2 - (4J+1) m + 2 = 0
    disc = (4 * J + 1) ** 2 - 32 * J
    if disc <= 0:
        return ()
    r = math.sqrt(disc)
    pts = (((4 * J + 1) - r) / (8 * J), ((4 * J + 1) + r) / (8 * J))
    return tuple(p for p in pts if 0 < p < 1)


def consistency_solutions(h: float, J: float, tol: float = ROOT_XTOL, grid: int = GRID) -> list[float]:
    """All roots of m = g((2m - 1) J + h) in (0, 1).

    Sign-change scan on a uniform grid (plus the turning points of H, so
    each monotone piece is bracketed) followed by Brent refinement.
    """
    if J == 0:
        return [g(h)]
    # the closed end m = 1 catches roots closer to 1 than the grid resolves
    ms = np.unique(np.concatenate((np.linspace(1e-300, 1 - 1e-16, grid), [1.0], spinodal_points(J))))
    F = _consistency(ms, h, J)
    roots = []
    for k in range(len(ms) - 1):
        a, b = F[k], F[k + 1]
        if a == 0:
            roots.append(float(ms[k]))
        elif a * b < 0:
            roots.append(brentq(_consistency, ms[k], ms[k + 1], args=(h, J), xtol=tol))
    if F[-1] == 0:
        roots.append(float(ms[-1]))
    return sorted(set(roots))


# ----------------------------------------------------------------- analysis


def _max_equal(a: float, b: float) -> bool:
    return abs(a - b) < 1e-11 + 1e-9 * max(abs(a), abs(b))


@dataclass(frozen=True)
class PsiAnalysis:
    h: float
    J: float
    maximizers: tuple
    values: tuple
    lambda2: tuple
    lambda4: tuple
    classification: str  # unique | coexistence | critical
    stationary: tuple = field(default=())

    @property
    def m_star(self) -> float:
        if len(self.maximizers) != 1:
            raise ValueError("m* is not unique on the coexistence curve")
        return self.maximizers[0]

    @property
    def pressure(self) -> float:
        return max(self.values)


CRITICAL_LAMBDA2 = 1e-6


def analyze(h: float, J: float, tol: float = 1e-9) -> PsiAnalysis:
    """Locate and classify the global maximisers of psi.

    Local maxima are the roots where m - g((2m-1)J + h) crosses upwards.
    Two maxima whose psi values agree within ``tol`` (relative) or the fixed
    1e-11 + 1e-9|psi| band count as coexisting.
    """
    if J < 0:
        raise ValueError("J must be >= 0")
    roots = consistency_solutions(h, J)
    if J == 0:
        m = roots[0]
        return PsiAnalysis(h, J, (m,), (float(p0(h)),), (0.0,), (0.0,), "unique", (m,))
    maxima = []
    for m in roots:
        d2 = psi_derivative(m, h, J, 2)
        if abs(d2) > 1e-12:
            if d2 < 0:
                maxima.append(m)
        # degenerate root: psi' = -2J F, so a maximum is an upward crossing of F
        elif _consistency(m - 1e-7, h, J) <= 0 <= _consistency(m + 1e-7, h, J):
            maxima.append(m)
    vals = [float(psi(m, h, J)) for m in maxima]
    best = max(vals)
    close = [
        (m, v) for m, v in zip(maxima, vals)
        if _max_equal(v, best) or abs(v - best) <= tol * abs(best)
    ]
    ms = tuple(m for m, _ in close)
    l2 = tuple(float(psi_derivative(m, h, J, 2)) for m in ms)
    l4 = tuple(float(psi_derivative(m, h, J, 4)) for m in ms)
    if len(ms) >= 2:
        kind = "coexistence"
        ms, vs = (ms[0], ms[-1]), (close[0][1], close[-1][1])
        l2, l4 = (l2[0], l2[-1]), (l4[0], l4[-1])
    else:
        vs = (close[0][1],)
        kind = "critical" if abs(l2[0]) < CRITICAL_LAMBDA2 else "unique"
    return PsiAnalysis(h, J, ms, vs, l2, l4, kind, tuple(roots))


@dataclass(frozen=True)
class CriticalPoint:
    h_c: float
    J_c: float
    m_c: float
    t_star: float
    lambda_c: float


def critical_point(tol: float = 1e-8) -> CriticalPoint:
    """Endpoint of the coexistence curve.

    t* is the root of g'' (bisection on the analytic second derivative), then
    m_c = g(t*), J_c = 1 / (2 g'(t*)) and h_c = t* - (2 m_c - 1) J_c.
    """
    a, b = -5.0, 5.0
    fa = g_derivative(a, 2)
    if fa * g_derivative(b, 2) >= 0:
        raise RuntimeError("g'' has no sign change on [-5, 5]")
    for _ in range(200):
        mid = 0.5 * (a + b)
        fm = g_derivative(mid, 2)
        if fm == 0 or b - a < 1e-16:
            break
        if (fm > 0) == (fa > 0):
            a, fa = mid, fm
        else:
            b = mid
    t = 0.5 * (a + b)
    m_c = g(t)
    J_c = 1.0 / (2.0 * g_derivative(t, 1))
    h_c = t - (2.0 * m_c - 1.0) * J_c
    d2 = psi_derivative(m_c, h_c, J_c, 2)
    d3 = psi_derivative(m_c, h_c, J_c, 3)
    if abs(d2) > tol or abs(d3) > tol:
        raise RuntimeError(f"critical point not certified: psi''={d2:.2e}, psi'''={d3:.2e}")
    lam = float(psi_derivative(m_c, h_c, J_c, 4))
    return CriticalPoint(float(h_c), float(J_c), float(m_c), float(t), lam)


# ------------------------------------------------------- coexistence curve


def _branch_root(h: float, J: float, lo: float, hi: float) -> float:
    """Solve g^{-1}(m) - (2m - 1) J = h on an interval where the left side is
    increasing."""
    f = lambda m: g_inverse(m) - (2 * m - 1) * J - h
    return _bracketed(f, lo, hi, ROOT_XTOL)


def _bracketed(f, lo: float, hi: float, xtol: float) -> float:
    """Brent root; at a spinodal edge the branch root sits on the bracket end
    and rounding can erase the sign change, in which case the end closest to
    a root is returned."""
    fa, fb = f(lo), f(hi)
    if fa * fb > 0:
        return lo if abs(fa) < abs(fb) else hi
    return brentq(f, lo, hi, xtol=xtol)


def _upper_branch_root(h: float, J: float, mb: float) -> float:
    """Same equation on (mb, 1), solved in s = log(1 - m) so that roots
    closer to 1 than double precision resolves are still bracketed."""
    f = lambda s: math.log1p(-math.exp(s)) - s / 2 - (1 - 2 * math.exp(s)) * J - h
    s = _bracketed(f, -1490.0, math.log1p(-mb), 1e-14)
    return 1.0 - math.exp(s)


def _branch_maxima(h: float, J: float) -> tuple[float, float]:
    ma, mb = spinodal_points(J)
    m1 = _branch_root(h, J, 1e-300, ma)
    m2 = _upper_branch_root(h, J, mb)
    return m1, m2


def coexistence_h(J: float, tol: float = 1e-13) -> float:
    """h = gamma(J): the field at which the two local maxima of psi tie.

    The tie gap psi(m2) - psi(m1) has h-derivative m2 - m1 > 0, so it is
    bisected on the interval where both maxima exist.
    """
    cp = critical_point()
    if J <= cp.J_c:
        raise NoCoexistenceError("no coexistence below critical coupling")
    pts = spinodal_points(J)
    if len(pts) != 2:
        raise NoCoexistenceError("no coexistence below critical coupling")
    ma, mb = pts
    H = lambda m: g_inverse(m) - (2 * m - 1) * J
    lo, hi = H(mb), H(ma)  # both maxima exist for lo < h < hi

    def gap(h):
        m1, m2 = _branch_maxima(h, J)
        return float(psi(m2, h, J) - psi(m1, h, J))

    a = lo + 1e-12 * (hi - lo)
    b = hi - 1e-12 * (hi - lo)
    ga, gb = gap(a), gap(b)
    if not (ga < 0 < gb):
        raise RuntimeError(f"tie gap not bracketed at J={J}: {ga}, {gb}")
    mid = 0.5 * (a + b)
    for _ in range(200):
        mid = 0.5 * (a + b)
        gm = gap(mid)
        if abs(gm) < tol * max(1.0, abs(float(psi(0.5, mid, J)))) and b - a < 1e-13:
            break
        if gm < 0:
            a = mid
        else:
            b = mid
        if b - a < 1e-15 * max(1.0, abs(mid)):
            break
    return float(mid)


@dataclass(frozen=True)
class CoexistencePoint:
    J: float
    h: float
    m1: float
    m2: float
    rho1: float
    rho2: float


def mixture_from_branches(h: float, J: float) -> tuple[float, float, float, float]:
    """(m1, m2, rho1, rho2) with rho_l proportional to (-lambda_l (2 - m_l))^{-1/2}."""
    m1, m2 = _branch_maxima(h, J)
    b = [(-psi_derivative(m, h, J, 2) * (2 - m)) ** -0.5 for m in (m1, m2)]
    return m1, m2, b[0] / (b[0] + b[1]), b[1] / (b[0] + b[1])


def trace_gamma(jmin: float, jmax: float, steps: int) -> list[CoexistencePoint]:
    """The coexistence curve on a uniform J grid (J must exceed J_c)."""
    out = []
    for J in np.linspace(jmin, jmax, steps):
        h = coexistence_h(float(J))
        m1, m2, r1, r2 = mixture_from_branches(h, float(J))
        out.append(CoexistencePoint(float(J), h, m1, m2, r1, r2))
    return out


def gamma_slope_at_critical(offsets=(1e-3, 5e-4, 2.5e-4)) -> float:
    """gamma'(J_c) from one-sided difference quotients, Richardson extrapolated.

    The quotients (gamma(J_c + e) - h_c) / e are linear in e to leading order;
    two Richardson passes on a halving sequence remove the O(e) and O(e^2)
    terms.
    """
    cp = critical_point()
    q = [(coexistence_h(cp.J_c + e) - cp.h_c) / e for e in offsets]
    r1 = [2 * q[k + 1] - q[k] for k in range(len(q) - 1)]
    if len(r1) == 1:
        return r1[0]
    return (4 * r1[1] - r1[0]) / 3


# -------------------------------------------------------- critical exponents


@dataclass(frozen=True)
class ExponentFit:
    direction: str
    exponent: float
    intercept: float
    residual: float
    offsets: tuple
    deviations: tuple
    warning: bool


DIRECTIONS = ("tangent", "nontangent_j", "nontangent_h")


def critical_exponents(
    direction: str,
    steps: int = 13,
    lo: float = 1e-5,
    hi: float = 1e-2,
    slope: float | None = None,
    residual_threshold: float = 0.05,
) -> ExponentFit:
    """Fit the power law |m* - m_c| ~ offset^e along a curve through the
    critical point.

    ``tangent``      h = h_c + gamma'(J_c)(J - J_c), J > J_c (expect 1/2)
    ``nontangent_j`` h = h_c + slope (J - J_c), J < J_c (expect 1/3)
    ``nontangent_h`` J = J_c, h = h_c + offset (expect 1/3)

    For ``nontangent_j`` the default slope is -1/gamma'(J_c), the normal to
    the coexistence curve. Any slope other than gamma'(J_c) has exponent 1/3
    in the limit, but the approach is slow when the curve is close to
    tangent: at slope 0 the local exponent is still about 0.32 at 1e-5.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}")
    cp = critical_point()
    offsets = np.geomspace(hi, lo, steps)
    if direction == "tangent":
        s = gamma_slope_at_critical()
        pts = [(cp.h_c + s * e, cp.J_c + e) for e in offsets]
    elif direction == "nontangent_j":
        s = -1.0 / gamma_slope_at_critical() if slope is None else slope
        pts = [(cp.h_c - s * e, cp.J_c - e) for e in offsets]
    else:
        pts = [(cp.h_c + e, cp.J_c) for e in offsets]
    devs = []
    for h, J in pts:
        a = analyze(h, J)
        # on a tie either branch scales the same way; take the one farther out
        devs.append(max(abs(m - cp.m_c) for m in a.maximizers))
    X, Y = np.log(offsets), np.log(devs)
    coef, res, *_ = np.polyfit(X, Y, 1, full=True)
    rms = float(math.sqrt(res[0] / len(X))) if len(res) else 0.0
    warn = rms > residual_threshold
    if warn:
        warnings.warn(f"power-law fit residual {rms:.3g} above {residual_threshold}")
    return ExponentFit(direction, float(coef[0]), float(coef[1]), rms, tuple(offsets), tuple(devs), warn)
