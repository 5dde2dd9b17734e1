import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from gfdomain import kernels
from gfdomain import _pykernels
from gfdomain.interval import Box
from gfdomain.polyalg import (ArityMismatch, MultivarPoly, NonzeroConstantPart, PolyMap,
                              SingularLinearPart, monomial_index, poly_arith, poly_bound)

X = sp.symbols("x0:3")


def to_sympy(p: MultivarPoly):
    return sp.Integer(0) + sum(c * sp.prod([X[j] ** e[j] for j in range(p.nvars)]) for e, c in p.terms())


def truncated(expr, nvars, order):
    poly = sp.Poly(sp.expand(expr), *X[:nvars])
    return {e: float(c) for e, c in poly.terms() if sum(e) <= order}


def as_dict(p: MultivarPoly):
    return {e: c for e, c in p.terms()}


def same(d1, d2, tol=1e-12):
    keys = set(d1) | set(d2)
    return all(abs(d1.get(k, 0.0) - d2.get(k, 0.0)) <= tol * max(1.0, abs(d2.get(k, 0.0))) for k in keys)


def poly_strategy(nvars, order):
    idx = monomial_index(nvars, order)
    return st.lists(st.integers(-5, 5), min_size=idx.size, max_size=idx.size).map(
        lambda cs: MultivarPoly(idx, np.array(cs, dtype=float)))


def test_monomial_count_and_grading():
    idx = monomial_index(4, 7)
    assert idx.size == 330  # C(11, 4)
    deg = idx.exps.sum(axis=1)
    assert np.all(np.diff(deg) >= 0)
    assert idx.index([0, 0, 0, 0]) == 0


@settings(max_examples=40, deadline=None)
@given(poly_strategy(2, 4), poly_strategy(2, 4))
def test_product_matches_sympy(p, q):
    kept, dropped = poly_arith(p, q, "mul")
    assert same(as_dict(kept), truncated(to_sympy(p) * to_sympy(q), 2, 4))
    # kept + dropped is the exact product
    full = {**as_dict(kept), **{e: c for e, c in dropped.terms()}}
    assert same(full, truncated(to_sympy(p) * to_sympy(q), 2, 8))


@settings(max_examples=40, deadline=None)
@given(poly_strategy(3, 3), st.integers(0, 2))
def test_derivative_and_antiderivative(p, var):
    assert same(as_dict(p.derive(var)), truncated(sp.diff(to_sympy(p), X[var]), 3, 3))
    big = p.antiderive(var, promote=True)
    assert same(as_dict(big), truncated(sp.integrate(to_sympy(p), (X[var], 0, X[var])), 3, 4))
    assert same(as_dict(big.derive(var).with_order(3)), as_dict(p))


@settings(max_examples=25, deadline=None)
@given(poly_strategy(2, 3), poly_strategy(2, 3), poly_strategy(2, 3))
def test_composition_matches_sympy(f, g1, g2):
    g1.coeffs[0] = 0.0
    g2.coeffs[0] = 0.0
    out = PolyMap([f]).compose(PolyMap([g1, g2]))
    expr = to_sympy(f).subs({X[0]: to_sympy(g1), X[1]: to_sympy(g2)}, simultaneous=True)
    assert same(as_dict(out[0]), truncated(expr, 2, 3), tol=1e-10)


def test_inverse_round_trip():
    x = MultivarPoly.variable(0, 2, 6)
    y = MultivarPoly.variable(1, 2, 6)
    m = PolyMap([2 * x + y + x * x * y, y - 3 * x ** 3 + 0.5 * y ** 2])
    ident = m.compose(m.inverse())
    for i in range(2):
        expect = MultivarPoly.variable(i, 2, 6)
        assert np.max(np.abs(ident[i].coeffs - expect.coeffs)) < 1e-12


def test_inverse_errors():
    x = MultivarPoly.variable(0, 2, 3)
    with pytest.raises(SingularLinearPart):
        PolyMap([x, x]).inverse()
    with pytest.raises(NonzeroConstantPart):
        PolyMap([x + 1.0, MultivarPoly.variable(1, 2, 3)]).inverse()
    with pytest.raises(ArityMismatch):
        PolyMap([x]).inverse()


@settings(max_examples=40, deadline=None)
@given(poly_strategy(2, 4), st.lists(st.floats(-1, 1), min_size=2, max_size=2))
def test_bound_contains_values(p, pt):
    b = poly_bound(p)
    v = p(np.array(pt))
    assert b.lo - 1e-12 <= v <= b.hi + 1e-12
    box = Box.symmetric([0.5, 0.25])
    bb = p.bound(box)
    w = p(np.array(pt) * [0.5, 0.25])
    assert bb.lo - 1e-12 <= w <= bb.hi + 1e-12


def test_substitute_and_evaluate():
    x = MultivarPoly.variable(0, 2, 4)
    y = MultivarPoly.variable(1, 2, 4)
    p = x * x * y + 3 * y - 1.0
    s = p.substitute(1, 2.0)
    assert s(np.array([1.5, 99.0])) == pytest.approx(1.5 ** 2 * 2 + 6 - 1)
    pts = np.array([[0.1, 0.2], [-0.3, 0.7]])
    np.testing.assert_allclose(p.evaluate(pts), pts[:, 0] ** 2 * pts[:, 1] + 3 * pts[:, 1] - 1)


def test_text_round_trip():
    x = MultivarPoly.variable(0, 3, 5)
    z = MultivarPoly.variable(2, 3, 5)
    p = 0.1 * x ** 3 - z * x + 7.0
    q = MultivarPoly.from_text(p.to_text())
    np.testing.assert_array_equal(p.coeffs, q.coeffs)


def test_kernels_agree_with_fallback():
    rng = np.random.default_rng(3)
    idx = monomial_index(4, 5)
    a, b = rng.normal(size=idx.size), rng.normal(size=idx.size)
    ia, ib, ik = idx.mul_pairs
    np.testing.assert_allclose(kernels.mul_trunc(a, b, ia, ib, ik, idx.size),
                               _pykernels.mul_trunc(a, b, ia, ib, ik, idx.size), rtol=1e-13, atol=1e-13)
    pts = np.ascontiguousarray(rng.uniform(-1, 1, size=(7, 4)))
    exps = np.ascontiguousarray(idx.exps, dtype=np.int32)
    np.testing.assert_allclose(kernels.monomial_values(exps, pts), _pykernels.monomial_values(exps, pts),
                               rtol=1e-13)
