import math

import numpy as np
import pytest

from fracpoint.birman_schwinger import (Potential, bs_spectrum, detect_resonance,
                                        resonance_function, rollnick_norm)
from fracpoint.discretization import make_grid
from fracpoint.errors import ConfigError
from fracpoint.resonance_builder import BumpSpec, build_resonant_potential


def gaussian(x):
    return -np.exp(-np.asarray(x) ** 2)


@pytest.fixture(scope="module")
def resonant_3d():
    g = make_grid(3, 40.0, 200)
    V, psi, phi = build_resonant_potential(BumpSpec(), 1.8, 3, g)
    return g, V, psi, phi


# ------------------------------------------------------------ Rollnick

def test_rollnick_zero():
    g = make_grid(1, 5.0, 20)
    assert rollnick_norm(Potential(g, np.zeros(g.n)), 0.75, 1) == 0.0


def test_rollnick_indicator_1d():
    # V = -1 on [-1/2, 1/2]: int int |x - y|^{-1/2} = 2 int_0^1 (1 - t) t^{-1/2} dt
    g = make_grid(1, 0.5, 2000, grading=1)
    V = Potential(g, -np.ones(g.n))
    assert rollnick_norm(V, 0.75, 1) ** 2 == pytest.approx(8 / 3, rel=1e-4)


def test_rollnick_3d_gaussian_brute_force():
    # oracle: both angles integrated by hand, the radial double integral by
    # adaptive quadrature on the triangle r' < r
    from scipy.integrate import dblquad
    s, b = 1.8, 2 * 1.8 - 4
    V = lambda r: math.exp(-r * r)
    kern = lambda r, rp: 8 * math.pi ** 2 * r * rp * V(r) * V(rp) * \
        ((r + rp) ** b - abs(r - rp) ** b) / b
    ref = 2 * dblquad(lambda rp, r: kern(r, rp), 0, 6, 0, lambda r: r,
                      epsabs=0, epsrel=1e-10)[0]
    g = make_grid(3, 8.0, 1600)
    assert rollnick_norm(Potential.from_function(gaussian, g), s, 3) ** 2 == \
        pytest.approx(ref, rel=1e-4)


@pytest.mark.parametrize("d,s", [(1, 0.75), (3, 1.8)])
def test_rollnick_homogeneity(d, s):
    # ||V(./eps)||^2 = eps^{2s} ||V||^2 at eps = 2, on grids related by x -> 2x
    g = make_grid(d, 15.0, 300)
    a = rollnick_norm(Potential.from_function(gaussian, g), s, d)
    h = g.scaled(2.0)
    b = rollnick_norm(Potential.from_function(lambda x: gaussian(np.asarray(x) / 2), h), s, d)
    assert b ** 2 == pytest.approx(2 ** (2 * s) * a ** 2, rel=1e-6)


def test_rollnick_domain():
    g = make_grid(1, 5.0, 20)
    with pytest.raises(ConfigError):
        rollnick_norm(Potential.from_function(gaussian, g), 1.2, 1)


def test_norms_record():
    g = make_grid(3, 10.0, 200)
    n = Potential.from_function(gaussian, g).norms(1.8)
    assert n.l1 == pytest.approx(math.pi ** 1.5, rel=1e-4)
    assert n.weighted_l1 > n.l1 and math.isfinite(n.rollnick)


# ------------------------------------------------------------ spectrum

def test_spectrum_zero_potential():
    g = make_grid(1, 5.0, 20)
    assert not np.any(bs_spectrum(Potential(g, np.zeros(g.n)), 0.75, 0.0, g))


@pytest.mark.parametrize("d,s", [(1, 0.75), (3, 1.8), (3, 2.2)])
def test_attractive_spectrum_negative(d, s):
    g = make_grid(d, 10.0, 100)
    mu = bs_spectrum(Potential.from_function(gaussian, g), s, 0.0, g)
    assert mu[0] < 0
    assert np.all(mu <= 1e-12 * abs(mu[0]))


def test_spectrum_sorted_by_magnitude():
    g = make_grid(1, 10.0, 100)
    mu = bs_spectrum(Potential.from_function(gaussian, g), 4 / 3, 1.0, g)
    assert np.all(np.diff(np.abs(mu)) <= 0)


def test_coupling_linearity():
    g = make_grid(3, 10.0, 100)
    V = Potential.from_function(gaussian, g)
    a = bs_spectrum(V, 1.8, 0.0, g)
    b = bs_spectrum(V.scaled(2.5), 1.8, 0.0, g)
    assert np.allclose(b, 2.5 * a, rtol=1e-12, atol=1e-14)


# ----------------------------------------------------------- detection

def test_built_potential_is_resonant_and_simple(resonant_3d):
    g, V, _, _ = resonant_3d
    rep = detect_resonance(V, 1.8, g)
    assert rep.is_resonant and rep.is_simple
    assert rep.coupling > 0
    # normalisation <sign(V) phi, phi> = -1
    assert g.integrate(np.sign(V.values) * rep.phi ** 2) == pytest.approx(-1, rel=1e-12)


def test_half_resonant_potential_is_not_resonant(resonant_3d):
    g, V, _, _ = resonant_3d
    rep = detect_resonance(V.scaled(0.5), 1.8, g)
    assert not rep.is_resonant
    assert rep.nearest_eigenvalue == pytest.approx(-0.5, abs=5e-3)


def test_zero_potential_report():
    g = make_grid(3, 10.0, 40)
    rep = detect_resonance(Potential.from_function(lambda r: 0 * r, g), 1.8, g)
    assert not rep.is_resonant
    assert rep.nearest_eigenvalue == 0.0


def test_invalid_tolerance():
    g = make_grid(3, 10.0, 40)
    with pytest.raises(ConfigError):
        detect_resonance(Potential.from_function(gaussian, g), 1.8, g, tol=0.0)


def test_report_as_dict(resonant_3d):
    g, V, _, _ = resonant_3d
    d = detect_resonance(V, 1.8, g).as_dict()
    assert {"nearest_eigenvalue", "coupling", "is_resonant", "is_simple",
            "psi_asymptotic_coefficient"} <= set(d)


def test_zero_coupling_eigenvalue_is_not_a_resonance():
    # even V in 1D: odd eigenvectors do not couple to v
    s, f = 0.75, lambda x: -np.exp(-np.asarray(x) ** 2)
    norms = []
    for R in (20.0, 40.0):
        g = make_grid(1, R, 400)
        V = Potential.from_function(f, g)
        mu = bs_spectrum(V, s, 0.0, g)
        c = 1 / abs(mu[1])  # the odd ground state
        Vc = Potential.from_function(lambda x, c=c: c * f(x), g)
        rep = detect_resonance(Vc, s, g)
        assert rep.nearest_eigenvalue == pytest.approx(-1, abs=1e-3)
        assert not rep.is_resonant
        assert abs(rep.coupling) < 1e-8
        norms.append(g.l2_norm(resonance_function(rep, Vc, s, g).psi))
    assert norms[0] == pytest.approx(norms[1], rel=1e-2)


# -------------------------------------------------- resonance function

def test_resonance_function_tail(resonant_3d):
    g, V, _, _ = resonant_3d
    rep = detect_resonance(V, 1.8, g)
    rf = resonance_function(rep, V, 1.8, g)
    r = g.nodes
    far = (r > 0.5 * g.cutoff) & (r < 0.9 * g.cutoff)
    ratio = rf.psi[far] * r[far] ** (3 - 1.8) / rf.coefficient
    assert np.max(np.abs(ratio - 1)) <= 0.02


def test_coupling_identity(resonant_3d):
    g, V, _, _ = resonant_3d
    rep = detect_resonance(V, 1.8, g)
    psi = resonance_function(rep, V, 1.8, g).psi
    assert abs(rep.coupling + g.integrate(V.values * psi)) <= 1e-3 * rep.coupling


def test_distributional_equation(resonant_3d):
    g, V, _, _ = resonant_3d
    mu = detect_resonance(V, 1.8, g).nearest_eigenvalue
    W = V.scaled(1 / abs(mu))  # exact discrete eigenvalue -1
    rep = detect_resonance(W, 1.8, g)
    psi = resonance_function(rep, W, 1.8, g).psi
    vphi = W.v * rep.phi
    assert g.l2_norm(vphi + W.values * psi) <= 1e-6 * g.l2_norm(vphi)


def test_resonance_persists_under_geometric_scaling():
    # V_eps(x) = eps^{-s} V(x/eps) has the same B0 spectrum
    s, g = 1.8, make_grid(3, 20.0, 300)
    base = bs_spectrum(Potential.from_function(gaussian, g), s, 0.0, g)[:3]
    for eps in (0.5, 2.0):
        Ve = Potential.from_function(lambda r, e=eps: e ** -s * gaussian(np.asarray(r) / e), g)
        assert np.allclose(bs_spectrum(Ve, s, 0.0, g)[:3], base, rtol=1e-3)
