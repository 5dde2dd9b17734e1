import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _suites import noninvertible_suite
from gfdomain.certify import (CERTIFIED, DomainCertificate, JacobianRows, MissingVariationalData, PolyTarget,
                              certify_invertible, det_enclosure, jacobian_rows, max_certified_box,
                              scaled_box)
from gfdomain.certify import _precondition
from gfdomain.interval import Box, Interval
from gfdomain.polyalg import MultivarPoly, PolyMap
from gfdomain.symplectic import SymmetricMatrixS, build_alpha, example_maps, gradient_target
from gfdomain.taylormodel import TaylorModel, TmVector

METHODS = ["auto", "minors", "vertex", "ge"]


def cubic_target(S=None, order=7):
    m = example_maps("cubic2d", order=order)
    S = SymmetricMatrixS.zero(2) if S is None else S
    return gradient_target(m, build_alpha(S, m.linear_part))


def test_identity_rows():
    box = Box.symmetric([3.0, 3.0, 3.0])
    c = certify_invertible(jacobian_rows(PolyMap.identity(3, 4), box))
    assert c.certified and c.det_enclosure.contains(1.0) and c.det_enclosure.width <= 1e-12


def test_square_rows_enclose_zero():
    q, p = MultivarPoly.variable(0, 2, 3), MultivarPoly.variable(1, 2, 3)
    rows = jacobian_rows(PolyMap([q * q, p]), Box.symmetric([1.0, 1.0]))
    assert rows.rows[0][0].bound().contains(0.0)
    c = certify_invertible(rows)
    assert c.status == "Unknown" and c.det_enclosure.contains(0.0)


def test_flow_maps_need_variational_data():
    box = Box.symmetric([0.1, 0.1])
    with pytest.raises(MissingVariationalData):
        jacobian_rows(TmVector.identity(box, 3), box)


@pytest.mark.parametrize("name,pm,box", noninvertible_suite(), ids=[s[0] for s in noninvertible_suite()])
def test_never_certifies_noninvertible(name, pm, box):
    rows = jacobian_rows(pm, box)
    for method in METHODS:
        if method == "vertex" and box.dim > 4:
            continue
        assert not certify_invertible(rows, method=method).certified
    assert not certify_invertible(rows, max_pieces=300).certified


def _random_map(rng, v, order=3, scale=0.6):
    comps = []
    for i in range(v):
        p = MultivarPoly.variable(i, v, order)
        p.coeffs[v + 1:] = rng.uniform(-scale, scale, p.coeffs.size - v - 1)
        comps.append(p)
    return PolyMap(comps)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 4), st.floats(0.05, 0.6), st.sampled_from(METHODS))
def test_det_enclosure_contains_sampled_determinants(seed, v, h, method):
    rng = np.random.default_rng(seed)
    pm = _random_map(rng, v)
    box = Box.symmetric([h] * v)
    rows = jacobian_rows(pm, box)
    P = np.linalg.inv(rows.midpoint())
    enc = det_enclosure(_precondition(rows.rows, P), method)
    for _ in range(30):
        # independent points per row
        pts = rng.uniform(-h, h, size=(v, v))
        corner = rng.random(v) < 0.3
        pts[corner] = h * np.sign(rng.uniform(-1, 1, (int(corner.sum()), v)))
        jac = np.array([pm.jacobian_at(pts[i][None, :])[0][i] for i in range(v)])
        d = np.linalg.det(jac @ P)
        assert enc.lo - 1e-12 <= d <= enc.hi + 1e-12


def test_methods_agree_on_status_for_easy_box():
    rows = jacobian_rows(cubic_target(), Box.symmetric([0.2, 0.2]))
    assert all(certify_invertible(rows, method=m).certified for m in METHODS)


def test_cubic_zero_bound():
    c = max_certified_box(PolyTarget(cubic_target()), [1.0, 1.0], scale_hi=2.0, iters=14)
    assert c.certified
    assert 0.30 <= c.box[0].hi <= 0.40
    assert c.extra["failed_scale"] > c.extra["scale"]


def test_max_box_identity_immediate():
    c = max_certified_box(PolyTarget(PolyMap.identity(2, 3)), [1.0, 2.0], scale_hi=5.0)
    assert c.certified and c.extra["scale"] == 5.0 and c.box[1].hi == 10.0


def test_global_s_branch_and_bound():
    tgt = cubic_target(SymmetricMatrixS([0.0, 2.0, 0.0], 2))
    box = Box.symmetric([1.0, 1.0])
    assert not certify_invertible(jacobian_rows(tgt, box)).certified
    c = certify_invertible(jacobian_rows(tgt, box), max_pieces=4000)
    assert c.certified and not c.det_enclosure.contains(0.0)


def test_monotone_evidence():
    tgt = cubic_target()
    big = certify_invertible(jacobian_rows(tgt, Box.symmetric([0.3, 0.3])))
    assert big.certified
    for s in (0.05, 0.1, 0.2, 0.29):
        assert certify_invertible(jacobian_rows(tgt, Box.symmetric([s, s]))).certified


def test_preconditioning_invariance():
    rng = np.random.default_rng(7)
    tgt = cubic_target(SymmetricMatrixS([0.5, -0.2, 0.1], 2))
    for s in (0.05, 0.15, 0.25, 0.35, 0.5, 1.0):
        rows = jacobian_rows(tgt, Box.symmetric([s, s]))
        Q = np.eye(2) + 0.3 * rng.normal(size=(2, 2))
        mixed = [[r[0].scale(Q[0, j]) + r[1].scale(Q[1, j]) for j in range(2)] for r in rows.rows]
        other = JacobianRows(mixed, rows.box, rows.order)
        assert certify_invertible(other).status == certify_invertible(rows).status


def test_newton_inverse_spot_check():
    tgt = cubic_target()
    box = Box.symmetric([0.3, 0.3])
    assert certify_invertible(jacobian_rows(tgt, box)).certified
    rng = np.random.default_rng(11)
    for z in rng.uniform(-0.3, 0.3, size=(100, 2)):
        y = tgt(z)
        sol = y.copy()
        for _ in range(30):
            sol = sol - np.linalg.solve(tgt.jacobian_at(sol[None, :])[0], tgt(sol) - y)
        assert box.contains(sol)
        np.testing.assert_allclose(sol, z, atol=1e-9)


def test_certificate_text_round_trip():
    c = certify_invertible(jacobian_rows(cubic_target(), Box.symmetric([0.2, 0.2])), target="cubic")
    d = DomainCertificate.from_text(c.to_text())
    assert d.status == CERTIFIED and d.box == c.box and d.det_enclosure == c.det_enclosure
    assert d.target == "cubic" and d.order == c.order


def test_det_order_truncation_still_sound():
    rows = jacobian_rows(cubic_target(), Box.symmetric([0.25, 0.25]))
    full = certify_invertible(rows)
    cut = certify_invertible(rows, det_order=2)
    assert full.certified and cut.certified
    assert cut.order == 2


def test_asymmetric_aspect():
    c = max_certified_box(PolyTarget(cubic_target()), ([1.0, 0.5], [0.5, 1.0]), scale_hi=2.0)
    assert c.certified
    assert c.box[0].lo == pytest.approx(-2 * c.box[0].hi)


def test_vertex_is_exact_on_constant_rows():
    box = Box.symmetric([1.0, 1.0])
    rows = [[TaylorModel.constant(Interval(-0.1, 0.1), box, 2) for _ in range(2)] for _ in range(2)]
    enc = det_enclosure(rows, "vertex")
    # det(I + E) over entries in [-0.1, 0.1]: range [0.9^2 - 0.01, 1.1^2 + 0.01]
    assert enc.lo == pytest.approx(0.8, abs=1e-12) and enc.hi == pytest.approx(1.22, abs=1e-12)
    corners = [np.linalg.det(np.eye(2) + np.array(e).reshape(2, 2))
               for e in itertools.product([-0.1, 0.1], repeat=4)]
    assert enc.lo <= min(corners) and max(corners) <= enc.hi


def test_scaled_box():
    b = scaled_box(0.5, [1.0, 2.0], [3.0, 4.0])
    assert b.lo == [-0.5, -1.0] and b.hi == [1.5, 2.0]
