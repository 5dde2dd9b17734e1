import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from gfdomain.flows import (Beamline, Element, InclusionFailed, Jet, OdeSystem, SqrtDomain,
                            StepUnderflow, cell_map, cos, default_cell, exp, fpu_half_period,
                            fpu_system, element_system, growth_system, integrate_flow, oscillator_system,
                            picard_step, proton_brho, rk4, sin, sqrt)
from gfdomain.interval import Box, Interval
from gfdomain.symplectic import symplectic_residual
from gfdomain.taylormodel import TaylorModel


def enclosure_at(fe, x):
    """(lo, hi) of the flow enclosure at physical initial points x (m, d)."""
    lo, hi = [], []
    for tm in fe.flow:
        a, b = tm.enclose_at_scaled(tm.to_scaled(x))
        lo.append(a)
        hi.append(b)
    return np.array(lo).T, np.array(hi).T


def test_helpers_dispatch():
    assert sqrt(4.0) == 2.0 and sin(0.0) == 0.0 and cos(0.0) == 1.0 and exp(0.0) == 1.0
    np.testing.assert_allclose(sqrt(np.array([1.0, 9.0])), [1.0, 3.0])
    assert sin(Interval(0.5, 0.6)).contains(math.sin(0.55))
    box = Box.symmetric([0.1])
    x = TaylorModel.variable(0, box, 5)
    assert exp(x).bound().contains(math.exp(0.05))


def test_jet_derivatives():
    x = Jet(0.3, [1.0, 0.0])
    y = Jet(-0.7, [0.0, 1.0])
    f = sin(x * y) + sqrt(x * x + 1.0) / (y - 2.0) + exp(x) * y ** 2
    h = 1e-6

    def g(a, b):
        return math.sin(a * b) + math.sqrt(a * a + 1) / (b - 2) + math.exp(a) * b * b

    assert f.val == pytest.approx(g(0.3, -0.7))
    assert f.tan[0] == pytest.approx((g(0.3 + h, -0.7) - g(0.3 - h, -0.7)) / (2 * h), rel=1e-7)
    assert f.tan[1] == pytest.approx((g(0.3, -0.7 + h) - g(0.3, -0.7 - h)) / (2 * h), rel=1e-7)


def test_growth_encloses_e():
    fe = integrate_flow(growth_system(), Box([[1.0, 1.0]]), 0.0, 1.0, order=9)
    b = fe.flow[0].bound()
    assert b.contains(math.e) and b.width <= 1e-8
    assert fe.tf == 1.0 and fe.steps[-1][0] == 1.0


def test_growth_on_box_is_linear_in_x():
    fe = integrate_flow(growth_system(), Box([[0.5, 1.5]]), 0.0, 1.0, order=6)
    pm = fe.polymap()
    # x(1) = e * (1 + 0.5 t), t scaled
    assert pm[0].coeffs[0] == pytest.approx(math.e, rel=1e-12)
    assert pm[0].coeffs[1] == pytest.approx(0.5 * math.e, rel=1e-12)


def test_oscillator_returns():
    fe = integrate_flow(oscillator_system(), Box([[1.0, 1.0], [0.0, 0.0]]), 0.0, 2 * math.pi, order=9)
    q, p = (c.bound() for c in fe.flow)
    assert q.contains(1.0) and p.contains(0.0)
    assert q.width < 1e-8


def test_oscillator_box_flow_is_rotation():
    t = 1.3
    fe = integrate_flow(oscillator_system(), Box.symmetric([0.1, 0.1]), 0.0, t, order=6)
    lin = fe.physical_polymap().linear_part()
    np.testing.assert_allclose(lin, [[math.cos(t), math.sin(t)], [-math.sin(t), math.cos(t)]], atol=1e-12)


def test_fpu_sound_against_reference_solver():
    box = Box.symmetric([0.01] * 6)
    T = fpu_half_period()
    fe = integrate_flow(fpu_system(), box, 0.0, T, order=4, with_variational=True)
    rng = np.random.default_rng(4)
    x0 = rng.uniform(-0.01, 0.01, size=(20, 6))
    sysm = fpu_system()
    ref = np.array([solve_ivp(lambda t, y: sysm.rhs(t, list(y)), (0, T), x, rtol=1e-12, atol=1e-14,
                              method="DOP853").y[:, -1] for x in x0])
    lo, hi = enclosure_at(fe, x0)
    assert np.all(lo <= ref) and np.all(ref <= hi)
    # variational enclosure holds the reference Jacobian at the box centre
    eps = 1e-6
    J = np.empty((6, 6))
    for j in range(6):
        e = np.zeros(6)
        e[j] = eps
        J[:, j] = (rk4(sysm, e, 0.0, T, 400) - rk4(sysm, -e, 0.0, T, 400)) / (2 * eps)
    for i in range(6):
        for j in range(6):
            a, b = fe.variational[i][j].enclose_at_scaled(np.zeros((1, 6)))
            assert a[0] - 1e-7 <= J[i, j] <= b[0] + 1e-7


def test_fpu_energy_and_structure():
    sysm = fpu_system()
    assert sysm.dim == 6 and sysm.params["movers"] == [1, 2, 3]
    x = np.array([0.01, -0.02, 0.005, 0.1, 0.0, -0.05])
    y = rk4(sysm, x, 0.0, fpu_half_period(), 2000)
    assert sysm.hamiltonian(list(y)) == pytest.approx(sysm.hamiltonian(list(x)), rel=1e-8)


def test_step_underflow_on_blowup():
    sq = OdeSystem("blowup", 1, lambda t, x: [x[0] * x[0]])
    with pytest.raises(StepUnderflow):
        integrate_flow(sq, Box([[1.0, 1.0]]), 0.0, 2.0, order=5)


def test_single_step_inclusion_failure():
    sq = OdeSystem("blowup", 1, lambda t, x: [x[0] * x[0]])
    box = Box([[1.0, 1.0]])
    state = [TaylorModel.variable(0, box, 4)]
    with pytest.raises(InclusionFailed):
        picard_step(sq, state, 0.0, 1.5)


def test_cell_sqrt_domain():
    with pytest.raises(SqrtDomain):
        cell_map(order=3, box=Box.symmetric([0.1, 0.1, 0.8, 0.8]))


def test_cell_small_order_sound_and_symplectic():
    box = Box.symmetric([0.02] * 4)
    fe = cell_map(order=5, box=box)
    assert fe.max_remainder() < 1e-7
    # truncated verified polynomials are symplectic up to the remainder level
    assert symplectic_residual(fe.normalized_polymap()) < 1e-7
    rng = np.random.default_rng(2)
    x0 = rng.uniform(-0.02, 0.02, size=(30, 4))
    y = x0.copy()
    for e in default_cell().elements:
        y = rk4(element_system(e), y, 0.0, e.length, 400)
    lo, hi = enclosure_at(fe, x0)
    assert np.all(lo - 1e-12 <= y) and np.all(y <= hi + 1e-12)


def test_beamline_text_round_trip():
    b = default_cell()
    assert len(b.elements) == 7 and b.length == pytest.approx(5.5)
    c = Beamline.from_text(b.to_text())
    assert c.to_text() == b.to_text()
    with pytest.raises(ValueError):
        Element("wiggler", 1.0)


def test_proton_rigidity():
    assert proton_brho(1.0) == pytest.approx(0.14454, abs=5e-6)
