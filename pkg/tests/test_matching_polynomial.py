import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_graph
from monomer_dimer.graph_core import Graph, GraphSizeError, enumerate_matchings
from monomer_dimer.matching_polynomial import (
    MatchingPolynomial,
    certify_imaginary,
    certify_interlacing,
    graph_roots,
    imaginary_report,
    interlacing_chain,
    polynomial_coeffs,
    polynomial_roots,
)


@pytest.mark.parametrize(
    "n, coeffs",
    [(2, (1, 0, 1)), (3, (0, 3, 0, 1)), (4, (3, 0, 6, 0, 1))],
)
def test_complete_graph_coefficients(n, coeffs):
    assert polynomial_coeffs(Graph.complete(n)).coeffs == coeffs


def test_coefficients_sum_to_matching_count(rng):
    for _ in range(10):
        g = random_graph(rng, int(rng.integers(1, 9)))
        p = polynomial_coeffs(g)
        assert sum(p.coeffs) == sum(1 for _ in enumerate_matchings(g))
        assert p.coeffs[-1] == 1 and p.parity_ok()
        assert min(p.coeffs) >= 0


def test_coefficient_cap():
    with pytest.raises(GraphSizeError):
        polynomial_coeffs(Graph.from_edges(25, []))


@pytest.mark.parametrize(
    "coeffs, expected",
    [
        ((1, 0, 1), [-1j, 1j]),
        ((0, 3, 0, 1), [-1j * math.sqrt(3), 0, 1j * math.sqrt(3)]),
        (
            (3, 0, 6, 0, 1),
            sorted(
                [s * 1j * math.sqrt(3 + t * math.sqrt(6)) for s in (1, -1) for t in (1, -1)],
                key=lambda z: z.imag,
            ),
        ),
    ],
)
def test_roots_closed_form(coeffs, expected):
    roots = polynomial_roots(MatchingPolynomial(coeffs))
    np.testing.assert_allclose(roots, expected, atol=1e-12)


def test_roots_symmetric_under_conjugation_and_negation(rng):
    g = random_graph(rng, 9, p=0.6)
    w = {e: rng.uniform(0.1, 2) for e in g.edges}
    r = np.sort_complex(graph_roots(g, w))
    np.testing.assert_allclose(np.sort_complex(np.conj(r)), r, atol=1e-9)
    np.testing.assert_allclose(np.sort_complex(-r), r, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_zeros_are_imaginary(n, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n)
    w = {e: rng.uniform(1e-3, 2) for e in g.edges}
    assert certify_imaginary(g, w).passed


def test_k2_and_k4_pass():
    for n in (2, 4):
        rep = certify_imaginary(Graph.complete(n))
        assert rep.passed and rep.max_abs_real == 0.0


def test_corrupted_polynomial_fails():
    # x^3 + 3x with c1 negated has real roots +-sqrt(3)
    bad = polynomial_roots(MatchingPolynomial((0.0, -3.0, 0.0, 1.0)))
    assert not imaginary_report(bad).passed


def test_interlacing_k3_k2():
    rep = certify_interlacing(Graph.complete(3), None, 0)
    np.testing.assert_allclose(rep.a, [-math.sqrt(3), 0, math.sqrt(3)], atol=1e-12)
    np.testing.assert_allclose(rep.a_sub, [-1, 1], atol=1e-12)
    assert rep.strict


def test_interlacing_k2_k1():
    rep = certify_interlacing(Graph.complete(2), None, 1)
    assert rep.a_sub == (0.0,) and rep.strict


def test_interlacing_chain_detects_violation():
    gap, weak, strict = interlacing_chain([-1, 0, 1], [0.5, 0.8], 1e-9)
    assert not weak and not strict and gap < 0


def test_interlacing_every_vertex_small_graphs(rng):
    for _ in range(30):
        n = int(rng.integers(2, 8))
        g = random_graph(rng, n)
        w = {e: rng.uniform(0.1, 2) for e in g.edges}
        for i in range(n):
            assert certify_interlacing(g, w, i).weak


def test_strict_interlacing_complete_graphs(rng):
    g = Graph.complete(8)
    for _ in range(5):
        w = {e: rng.uniform(0.05, 2) for e in g.edges}
        rep = certify_interlacing(g, w, int(rng.integers(0, 8)))
        assert rep.strict and rep.min_gap > 1e-9
