"""Matching polynomials in a uniform monomer activity and their zeros.

Z_G(x) = sum_k c_k x^k, where c_k is the total dimer weight of matchings that
leave k monomers. Roots are computed for Q(y) = i^{-N} Z(i y), which has real
coefficients; the roots of Z are then x = i y.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph_core import Graph, GraphSizeError, canon

POLY_CAP = 24
NEWTON_STEPS = 8


class RootFindingError(RuntimeError):
    pass


@dataclass(frozen=True)
class MatchingPolynomial:
    """Coefficients c_0..c_N in ascending powers of x."""

    coeffs: tuple

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, np.array(self.coeffs))

    def parity_ok(self) -> bool:
        N = self.degree
        return all(c == 0 for k, c in enumerate(self.coeffs) if (N - k) % 2)


def _weights(g: Graph, w) -> dict:
    if w is None:
        return {e: 1.0 for e in g.edges}
    if isinstance(w, (int, float)):
        return {e: float(w) for e in g.edges}
    return {canon(*e): float(v) for e, v in dict(w).items()}


def polynomial_coeffs(g: Graph, w=None) -> MatchingPolynomial:
    """Heilmann-Lieb recursion carried out on coefficient vectors.

    ``w`` may be None (unit weights), a scalar or an edge->weight mapping.
    """
    if g.n > POLY_CAP:
        raise GraphSizeError(f"polynomial_coeffs: n = {g.n} exceeds cap {POLY_CAP}")
    weights = _weights(g, w)
    adj = [0] * g.n
    for (i, j), v in weights.items():
        if v != 0:
            adj[i] |= 1 << j
            adj[j] |= 1 << i
    memo: dict[int, np.ndarray] = {0: np.array([1.0])}

    def rec(mask: int) -> np.ndarray:
        if mask in memo:
            return memo[mask]
        k = mask.bit_count()
        low = mask & -mask
        i = low.bit_length() - 1
        rest = mask ^ low
        parts = [np.concatenate(([0.0], rec(rest)))]  # x * Z_{G-i}
        nb = adj[i] & rest
        while nb:
            b = nb & -nb
            j = b.bit_length() - 1
            sub = weights[canon(i, j)] * rec(rest ^ b)
            parts.append(np.concatenate((sub, [0.0, 0.0])))
            nb ^= b
        stacked = np.vstack(parts)
        out = np.array([math.fsum(col) for col in stacked.T])
        assert len(out) == k + 1
        memo[mask] = out
        return out

    return MatchingPolynomial(tuple(float(c) for c in rec((1 << g.n) - 1)))


def _rotated(coeffs: np.ndarray) -> np.ndarray:
    """Coefficients of Q(y) = i^{-N} Z(i y); real when parity holds."""
    N = len(coeffs) - 1
    out = np.zeros(N + 1)
    for k, c in enumerate(coeffs):
        if (N - k) % 2 == 0:
            out[k] = c * (-1) ** ((N - k) // 2)
        elif c != 0:
            raise ValueError("coefficient parity violated")
    return out


def _polish(coeffs: np.ndarray, roots: np.ndarray) -> np.ndarray:
    """A few complex Newton steps per root, keeping a step only if it helps."""
    P = np.polynomial.Polynomial(coeffs)
    dP = P.deriv()
    out = roots.astype(complex).copy()
    for k, z in enumerate(out):
        best = abs(P(z))
        for _ in range(NEWTON_STEPS):
            d = dP(z)
            if d == 0:
                break
            znew = z - P(z) / d
            r = abs(P(znew))
            if not r < best:
                break
            z, best = znew, r
        out[k] = z
    return out


def _scale(coeffs, z) -> float:
    return float(sum(abs(c) * abs(z) ** k for k, c in enumerate(coeffs)))


def polynomial_roots(p: MatchingPolynomial, tol: float = 1e-8) -> np.ndarray:
    """All N complex roots of Z(x), sorted by imaginary part.

    Exact zero roots are split off first. When the parity structure holds the
    rest is solved in z = y^2 (half the degree), and y = +-sqrt(z).
    """
    c = np.array(p.coeffs, dtype=float)
    N = len(c) - 1
    if N < 1:
        raise ValueError("polynomial_roots needs degree >= 1")
    if c[-1] == 0:
        raise ValueError("leading coefficient is zero")
    zeros = int(np.argmax(c != 0))
    core = c[zeros:]
    if len(core) == 1:
        ys = np.zeros(0, dtype=complex)
    elif p.parity_ok():
        # after stripping x^zeros the degree is even and only even powers remain
        half = _rotated(core)[0::2]
        z = np.roots(half[::-1])
        z = _polish(half, z)
        s = np.sqrt(z.astype(complex))
        ys = np.concatenate((s, -s))
    else:
        q = np.array([cc * (1j) ** (k - (len(core) - 1)) for k, cc in enumerate(core)])
        ys = np.roots(q[::-1]).astype(complex)
        ys = _polish(q, ys)
    ys = np.concatenate((np.zeros(zeros, dtype=complex), ys))
    xs = 1j * ys
    resid = [abs(p(x)) / max(_scale(c, x), 1e-300) for x in xs]
    worst = max(resid) if resid else 0.0
    if not worst < tol:
        raise RootFindingError(
            f"root residual {worst:.3e} above tol {tol:g} (degree {N}, coeffs {p.coeffs})"
        )
    return xs[np.lexsort((xs.real, xs.imag))]


@dataclass(frozen=True)
class ImaginaryReport:
    max_abs_real: float
    max_abs_root: float
    passed: bool


def _components(g: Graph) -> list[list[int]]:
    seen, comps = set(), []
    for v in range(g.n):
        if v in seen:
            continue
        dist = g.distances_from(v)
        comp = [u for u in range(g.n) if dist[u] < math.inf]
        seen.update(comp)
        comps.append(comp)
    return comps


def graph_roots(g: Graph, w=None, tol: float = 1e-8) -> np.ndarray:
    """Roots of Z_G(x), solved per connected component (Z factorises over
    components, which keeps repeated factors out of a single solve)."""
    weights = _weights(g, w)
    roots = []
    for comp in _components(g):
        sub, keep = g.induced(comp)
        sw = {(i, j): weights[canon(keep[i], keep[j])] for i, j in sub.edges}
        roots.append(polynomial_roots(polynomial_coeffs(sub, sw), tol))
    xs = np.concatenate(roots) if roots else np.zeros(0, dtype=complex)
    return xs[np.lexsort((xs.real, xs.imag))]


def imaginary_report(roots: np.ndarray, tol: float = 1e-8) -> ImaginaryReport:
    mre = float(np.max(np.abs(roots.real))) if len(roots) else 0.0
    mr = float(np.max(np.abs(roots))) if len(roots) else 0.0
    return ImaginaryReport(mre, mr, mre < tol * (1 + mr))


def certify_imaginary(g: Graph, w=None, tol: float = 1e-8) -> ImaginaryReport:
    return imaginary_report(graph_roots(g, w, tol), tol)


@dataclass(frozen=True)
class InterlacingReport:
    a: tuple  # imaginary parts for G, ascending
    a_sub: tuple  # imaginary parts for G - i
    min_gap: float  # smallest step of the merged chain a1 <= a'1 <= a2 ...
    weak: bool
    strict: bool


def interlacing_chain(a, b, tol: float) -> tuple[float, bool, bool]:
    """Check a_1 <= b_1 <= a_2 <= ... <= b_{N-1} <= a_N.

    Returns (min gap, weak pass, strict pass). Values within ``tol`` of each
    other count as ties for the weak check.
    """
    a, b = sorted(a), sorted(b)
    if len(b) != len(a) - 1:
        raise ValueError("need exactly one fewer root for the deleted graph")
    chain = [a[0]]
    for k in range(len(b)):
        chain += [b[k], a[k + 1]]
    gaps = np.diff(chain) if len(chain) > 1 else np.array([math.inf])
    gap = float(gaps.min())
    return gap, bool(gap >= -tol), bool(gap > tol)


def certify_interlacing(g: Graph, w=None, i: int = 0, tol: float = 1e-9) -> InterlacingReport:
    """Interlacing of the zeros of Z_G and Z_{G-i} along the imaginary axis."""
    weights = _weights(g, w)
    keep = [v for v in range(g.n) if v != i]
    sub, labels = g.induced(keep)
    sw = {(p, q): weights[canon(labels[p], labels[q])] for p, q in sub.edges}
    a = np.sort(graph_roots(g, weights).imag)
    b = np.sort(graph_roots(sub, sw).imag) if sub.n else np.zeros(0)
    gap, weak, strict = interlacing_chain(a, b, tol)
    return InterlacingReport(tuple(a), tuple(b), gap, weak, strict)
