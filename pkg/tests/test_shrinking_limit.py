import math

import numpy as np
import pytest
from scipy.optimize import brentq

from fracpoint.birman_schwinger import Potential, detect_resonance
from fracpoint.core_math import (FractionalParams, Friedrichs, PointInteraction,
                                 bound_state_energy, c_coefficient, sin_pi)
from fracpoint.discretization import hs_norm, kernel_matrix, make_grid
from fracpoint.errors import ConfigError, NumericalError
from fracpoint.green_kernel import green_at_zero_closed_form
from fracpoint.point_interaction import green_vector
from fracpoint.resonance_builder import BumpSpec, build_resonant_potential
from fracpoint.shrinking_limit import (LimitRegime, ScalingScheme, Verdict,
                                       abc_operators, abc_reconstruction,
                                       b_expansion_check, calibrate,
                                       central_limit_check, convergence_sweep,
                                       exceptional_lambda, konno_kuroda_matrix,
                                       konno_kuroda_resolvent, outer_prefactor,
                                       predicted_alpha, scale_potential)

RES3 = ScalingScheme(LimitRegime.ThreeDResonant)
INDEP = ScalingScheme(LimitRegime.OneDIndependent)


def gaussian_1d(mass, width):
    c = mass / math.sqrt(2 * math.pi * width * width)
    return lambda x: c * np.exp(-np.asarray(x) ** 2 / (2 * width * width))


@pytest.fixture(scope="module")
def resonant_3d():
    g = make_grid(3, 20.0, 160, kind="geometric", inner=1e-5)
    V, psi, phi = build_resonant_potential(BumpSpec(width=0.1), 1.8, 3, g)
    return g, V


@pytest.fixture(scope="module")
def resonant_1d():
    g = make_grid(1, 20.0, 300, kind="geometric", inner=1e-5)
    V, psi, phi = build_resonant_potential(BumpSpec(width=0.3), 0.7, 1, g)
    return g, V


# ------------------------------------------------------------ scaling

def test_scale_potential_identity_at_one():
    g = make_grid(1, 10.0, 40)
    V = Potential.from_function(gaussian_1d(-1, 1), g)
    for scheme in (INDEP, ScalingScheme(LimitRegime.OneDIndependent, eta0=0.3)):
        assert np.array_equal(scale_potential(V, 1.0, scheme, 4 / 3, 1).values, V.values)


def test_scale_potential_integral_resonant():
    g = make_grid(3, 20.0, 200, kind="geometric")
    V = Potential.from_function(lambda r: -np.exp(-np.asarray(r) ** 2), g)
    sch = ScalingScheme(LimitRegime.ThreeDResonant, eta_strength=0.7)
    eps = 0.5
    Ve = scale_potential(V, eps, sch, 1.8, 3)
    # on a geometric grid the scaled grid nodes are shared, so this is exact
    ref = sch.eta_at(eps, 1.8) * eps ** (3 - 1.8) * \
        Potential.from_function(V.sampler, g.scaled(1 / eps)).integral
    assert Ve.integral == pytest.approx(ref, rel=1e-12)
    assert Ve.integral == pytest.approx(sch.eta_at(eps, 1.8) * eps ** 1.2 * V.integral,
                                        rel=1e-6)


def test_scale_potential_integral_independent():
    g = make_grid(1, 20.0, 400, kind="geometric")
    V = Potential.from_function(gaussian_1d(-0.4, 0.5), g)
    sch = ScalingScheme(LimitRegime.OneDIndependent, eta0=0.5)
    for eps in (0.3, 0.05):
        Ve = scale_potential(V, eps, sch, 4 / 3, 1)
        assert Ve.integral == pytest.approx(sch.eta_at(eps, 4 / 3) * V.integral, rel=1e-6)


def test_scale_potential_errors():
    g = make_grid(1, 10.0, 20)
    V = Potential.from_function(gaussian_1d(-1, 1), g)
    with pytest.raises(ConfigError):
        scale_potential(V, 0.0, INDEP, 4 / 3, 1)
    with pytest.raises(ConfigError):
        scale_potential(Potential(g, V.values), 0.5, INDEP, 4 / 3, 1)


def test_default_eta():
    sch = ScalingScheme(LimitRegime.ThreeDResonant, eta_strength=2.0)
    # the exact default 1 + eta_s eps^{d-s} has eta(1) = 1 + eta_s
    assert sch.eta_at(1.0, 1.8) == 3.0
    assert sch.eta_at(0.25, 1.8) == pytest.approx(1 + 2 * 0.25 ** 1.2)
    ind = ScalingScheme(LimitRegime.OneDIndependent, eta0=0.4)
    assert ind.eta_at(1.0, 4 / 3) == 1.0 and ind.eta_at(0.0, 4 / 3) == 0.4


def test_scheme_checks_regime():
    with pytest.raises(ConfigError):
        RES3.check(1.2, 3)
    with pytest.raises(ConfigError):
        INDEP.check(0.75, 1)
    with pytest.raises(ConfigError):
        INDEP.check(4 / 3, 3)


# ------------------------------------------------------- Konno-Kuroda

def _random_instance(rng, n=100):
    Q = rng.standard_normal((n, n)) / math.sqrt(n)
    A = Q @ Q.T + 0.1 * np.eye(n)
    V = rng.standard_normal(n)
    lam = rng.uniform(0.5, 2.0)
    return A, V, lam


def test_konno_kuroda_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        A, V, lam = _random_instance(rng)
        R = np.linalg.inv(A + lam * np.eye(len(V)))
        K = konno_kuroda_matrix(R, V)
        ref = np.linalg.inv(A + np.diag(V) + lam * np.eye(len(V)))
        assert np.linalg.norm(K - ref) <= 1e-10 * np.linalg.norm(ref)


def test_konno_kuroda_singular_lambda_is_bound_state():
    rng = np.random.default_rng(9)
    A, _, _ = _random_instance(rng, 60)
    V = -3.0 * rng.uniform(0.5, 1.5, 60)
    e_min = np.linalg.eigvalsh(A + np.diag(V))[0]
    assert e_min < 0
    u, v = np.sign(V) * np.sqrt(-V), np.sqrt(-V)

    def f(lam):
        R = np.linalg.inv(A + lam * np.eye(60))
        return np.min(np.linalg.eigvals(u[:, None] * R * v[None, :]).real) + 1

    lam_star = brentq(f, 1e-3 - e_min * 0.5, -e_min * 2, xtol=1e-14)
    assert lam_star == pytest.approx(-e_min, rel=1e-10)
    R = np.linalg.inv(A + lam_star * np.eye(60))
    with pytest.raises(NumericalError, match="nearest BS eigenvalue"):
        konno_kuroda_matrix(R, V)


def test_konno_kuroda_zero_potential_is_free():
    g = make_grid(1, 10.0, 40)
    K = konno_kuroda_resolvent(np.zeros(g.n), 4 / 3, 1.0, g)
    assert np.array_equal(K.matrix.entries, kernel_matrix(4 / 3, 1.0, g))
    assert str(K.descriptor) == "KonnoKuroda(eps=None)"


# ----------------------------------------------------------------- ABC

@pytest.mark.parametrize("eps", [0.3, 0.1, 0.05])
def test_abc_reconstruction_resonant(resonant_3d, eps):
    g, V = resonant_3d
    sch = ScalingScheme(LimitRegime.ThreeDResonant, eta_strength=1.0)
    R = kernel_matrix(1.8, 1.0, g)
    A, B, C = abc_operators(V, eps, 1.8, 1.0, sch, g, R=R)
    rec = abc_reconstruction(A, B, C, R, outer_prefactor(eps, sch, 1.8, 3))
    K = konno_kuroda_matrix(R, scale_potential(V, eps, sch, 1.8, 3).values)
    assert hs_norm(rec - K) <= 1e-8 * hs_norm(R)


@pytest.mark.parametrize("eps", [0.3, 0.05])
def test_abc_reconstruction_independent(eps):
    g = make_grid(1, 20.0, 200, kind="geometric")
    V = Potential.from_function(gaussian_1d(-0.5, 0.5), g)
    sch = ScalingScheme(LimitRegime.OneDIndependent, eta0=0.5)
    R = kernel_matrix(4 / 3, 1.0, g)
    A, B, C = abc_operators(V, eps, 4 / 3, 1.0, sch, g, R=R)
    rec = abc_reconstruction(A, B, C, R, outer_prefactor(eps, sch, 4 / 3, 1))
    K = konno_kuroda_matrix(R, scale_potential(V, eps, sch, 4 / 3, 1).values)
    assert hs_norm(rec - K) <= 1e-8 * hs_norm(R)


def test_a_and_b_limits_independent():
    s, lam = 4 / 3, 1.0
    g = make_grid(1, 20.0, 200, kind="geometric")
    V = Potential.from_function(gaussian_1d(-0.5, 0.5), g)
    sch = ScalingScheme(LimitRegime.OneDIndependent, eta0=0.5)
    gv = green_vector(s, lam, g)
    g0 = green_at_zero_closed_form(s, lam)
    eps_list = (0.2, 0.1, 0.05, 0.025)
    da, db = [], []
    for eps in eps_list:
        y = g.scaled(1 / eps)
        Vy = V.on_grid(y)
        A, B, _ = abc_operators(V, eps, s, lam, sch, g)
        La = np.outer(gv, y.to_vec(Vy.v))
        Lb = sch.eta0 * g0 * np.outer(y.to_vec(Vy.u), y.to_vec(Vy.v))
        da.append(hs_norm(A.entries - La) / hs_norm(La))
        db.append(hs_norm(B.entries - Lb) / hs_norm(Lb))
    assert np.all(np.diff(da) < 0) and np.all(np.diff(db) < 0)
    assert da[-1] < 0.1
    # B approaches its limit slowly, at the observed rate eps^{s-1}
    order = np.polyfit(np.log(eps_list), np.log(db), 1)[0]
    assert 0.2 < order < 0.5


# --------------------------------------------------------- expansions

def test_b_expansion_eta_one_decreasing(resonant_3d):
    g, V = resonant_3d
    res, order = b_expansion_check(V, 1.8, 1.0, RES3, g, eps_list=(0.2, 0.1, 0.05))
    assert np.all(np.diff(res) < 0)
    assert order > 0


def test_b_expansion_requires_resonant_regime():
    g = make_grid(1, 10.0, 40)
    V = Potential.from_function(gaussian_1d(-1, 1), g)
    with pytest.raises(ConfigError):
        b_expansion_check(V, 4 / 3, 1.0, INDEP, g)


def test_s2_expansion_coefficient():
    # e^{-k r}/(4 pi r) = 1/(4 pi r) - k/(4 pi) + ...
    assert c_coefficient(2.0, 3) == pytest.approx(-1 / (4 * math.pi), rel=1e-14)


def test_b_expansion_1d_selects_sin_pi_over_s(resonant_1d):
    # the implemented c_1 = 1/(s sin(pi/s)) makes the residual decay; the
    # alternative 1/(s sin(3 pi/s)) leaves an O(1) plateau
    g, V = resonant_1d
    s, lam = 0.7, 1.0
    sch = ScalingScheme(LimitRegime.OneDResonant)
    eps_list = (0.2, 0.1, 0.05)
    res, _ = b_expansion_check(V, s, lam, sch, g, eps_list=eps_list)
    assert np.all(np.diff(res) < 0)
    c_alt = 1 / (s * sin_pi(3 / s))
    shift = abs(c_alt - c_coefficient(s, 1))
    plateau = []
    for eps in eps_list:
        y = g.scaled(1 / eps)
        Vy = V.on_grid(y)
        plateau.append(shift * hs_norm(np.outer(y.to_vec(Vy.u), y.to_vec(Vy.v))))
    # the alternative's residual is at least plateau - res, which does not decay
    lower = np.array(plateau) - res
    assert np.ptp(plateau) < 1e-6 * plateau[0]
    assert np.all(lower > 0.8 * plateau[0])
    assert res[-1] < 0.1 * plateau[-1]


def test_eps_power_of_1d_expansion(resonant_1d):
    # (G_{mu eps} - G_0)(0) / (mu eps)^{1-s} = c_1 exactly in the kernel diagonal
    g, V = resonant_1d
    s = 0.7
    x = np.array([1e-3, 1e-2])
    from fracpoint.green_kernel import green_table
    t = green_table(s)
    for lam in (1e-4, 1e-6):
        diff = (t.kernel(lam, x) - t.kernel(0.0, x)) / lam ** ((1 - s) / s)
        assert np.allclose(diff, c_coefficient(s, 1), rtol=2e-2)


# ------------------------------------------------------- central limit

def test_central_limit_eta_one(resonant_3d):
    g, V = resonant_3d
    Vc, rep, _ = calibrate(V, 1.8, g)
    res = central_limit_check(Vc, rep.phi, 1.8, 1.0, 0.0, g, eps_list=(0.2, 0.1, 0.05))
    assert res.coefficient_predicted < 0  # sign of sin(3 pi/s)
    assert np.all(np.diff(res.distances) < 0)
    assert res.singular_ratio[-1] <= 0.1
    assert res.coefficient_numeric[-1] == pytest.approx(res.coefficient_predicted, rel=0.1)


def test_central_limit_phi_pairing(resonant_3d):
    # the limit applied to phi returns -kappa^{-1} phi since <phi~, phi> = -1
    g, V = resonant_3d
    Vc, rep, _ = calibrate(V, 1.8, g)
    eps, s, mu = 0.05, 1.8, 1.0
    y = g.scaled(1 / eps)
    Vy = Vc.on_grid(y)
    Be = Vy.u[:, None] * kernel_matrix(s, eps ** s, y) * Vy.v[None, :]
    X = (mu * eps) ** (3 - s) * np.linalg.inv(np.eye(y.n) + Be)
    phi = y.to_vec(detect_resonance(Vy, s, y).phi)  # phi on the y-grid
    kappa_inv = central_limit_check(Vc, rep.phi, s, mu, 0.0, g, eps_list=(eps,)).coefficient_predicted
    out = X @ phi
    assert np.linalg.norm(out + kappa_inv * phi) <= 0.1 * abs(kappa_inv) * np.linalg.norm(phi)


def test_central_limit_skips_singular(resonant_3d):
    # a distortion factor chosen so that B_eps has the eigenvalue -1 exactly
    g, V = resonant_3d
    Vc, rep, _ = calibrate(V, 1.8, g)
    eps, s = 0.1, 1.8
    y = g.scaled(1 / eps)
    Vy = Vc.on_grid(y)
    B = Vy.u[:, None] * kernel_matrix(s, eps ** s, y) * Vy.v[None, :]
    w = np.linalg.eigvals(B).real
    mu = w[np.argmin(np.abs(w + 1))]
    sch = ScalingScheme(LimitRegime.ThreeDResonant, eta=lambda e: 1 / abs(mu))
    with pytest.warns(RuntimeWarning, match="singular"):
        res = central_limit_check(Vc, rep.phi, s, 1.0, 0.0, g, eps_list=(eps, 0.05),
                                  scheme=sch)
    assert list(res.epsilons) == [0.05]


# --------------------------------------------------------- predictions

def test_predicted_alpha_examples(resonant_3d):
    g, V = resonant_3d
    rep = detect_resonance(V, 1.8, g)
    assert predicted_alpha(V, rep, RES3, 3) == 0.0
    sch2 = ScalingScheme(LimitRegime.ThreeDResonant, eta_strength=2.0)
    rep.coupling = 1.0
    assert predicted_alpha(V, rep, sch2, 3) == -2.0
    assert predicted_alpha(-1.0, None, INDEP, 1) == 1.0
    rep.is_resonant = False
    assert predicted_alpha(V, rep, sch2, 3) is Friedrichs


def test_predicted_alpha_zero_integral():
    with pytest.raises(ConfigError, match="undefined"):
        predicted_alpha(0.0, None, INDEP, 1)


def test_exceptional_lambda_example():
    # 1 + eta0 int V / (lam^{1-1/s} s sin(pi/s)) = 0 with eta0 = 1, int V = -1,
    # s = 4/3: lam^{1/4} = 3 / (2 sqrt 2), so lam = 81/64
    lam = exceptional_lambda(-1.0, 1.0, 4 / 3)
    assert lam == pytest.approx(81 / 64, rel=1e-13)
    assert 1 - 1 / (lam ** 0.25 * (4 / 3) * sin_pi(3 / 4)) == pytest.approx(0, abs=1e-14)
    assert exceptional_lambda(1.0, 1.0, 4 / 3) is None


def test_exceptional_lambda_matches_bound_state():
    rng = np.random.default_rng(17)
    for _ in range(50):
        s = rng.uniform(1.05, 1.45)
        eta0 = rng.uniform(0.2, 2.0)
        integral = -rng.uniform(0.1, 3.0)
        lam = exceptional_lambda(integral, eta0, s)
        alpha = -1 / (eta0 * integral)
        E = bound_state_energy(PointInteraction(FractionalParams(s, 1), alpha))
        assert abs(lam - abs(E)) <= 1e-12 * abs(E)


# ---------------------------------------------------------------- sweeps

def test_sweep_zero_potential_is_free():
    g = make_grid(3, 10.0, 60, kind="geometric")
    V = Potential.from_function(lambda r: 0 * np.asarray(r), g)
    res = convergence_sweep(V, RES3, 1.8, 3, 1.0)
    assert not np.any(res.dist_to_free)
    assert res.verdict is Verdict.ConvergesToFree
    assert res.alpha_predicted is Friedrichs


def test_sweep_independent_converges_to_point():
    g = make_grid(1, 20.0, 400, kind="geometric")
    V = Potential.from_function(gaussian_1d(-0.2, 0.3), g)
    res = convergence_sweep(V, INDEP, 4 / 3, 1, 1.0, eps_list=(0.3, 0.2, 0.1, 0.05))
    assert res.alpha_predicted == pytest.approx(5.0, rel=1e-3)
    assert res.verdict is Verdict.ConvergesToPoint
    assert np.max(res.abc_residuals) <= 1e-8
    assert set(res.as_dict()) >= {"verdict", "fitted_order", "alpha_predicted"}


def test_sweep_1d_resonant():
    g = make_grid(1, 20.0, 300, kind="geometric", inner=1e-5)
    V, _, _ = build_resonant_potential(BumpSpec(width=0.1), 0.9, 1, g)
    res = convergence_sweep(V, ScalingScheme(LimitRegime.OneDResonant), 0.9, 1, 1.0)
    assert res.alpha_predicted == 0.0
    assert res.verdict is Verdict.ConvergesToPoint
    assert np.max(res.abc_residuals) <= 1e-8


def test_sweep_1d_resonant_rate():
    # observed Hilbert-Schmidt rate eps^{s - d/2}; at s = 0.75 it is too slow
    # for the 5% extrapolation rule on eps >= 0.05
    g = make_grid(1, 20.0, 300, kind="geometric", inner=1e-5)
    V, _, _ = build_resonant_potential(BumpSpec(width=0.1), 0.75, 1, g)
    res = convergence_sweep(V, ScalingScheme(LimitRegime.OneDResonant), 0.75, 1, 1.0)
    assert np.all(np.diff(res.dist_to_point) < 0)
    assert res.fitted_order == pytest.approx(0.25, rel=0.2)


def test_sweep_rejects_bad_input(resonant_3d):
    g, V = resonant_3d
    with pytest.raises(ConfigError):
        convergence_sweep(V, RES3, 1.8, 3, 0.0)
    with pytest.raises(ConfigError):
        convergence_sweep(V, INDEP, 1.8, 3, 1.0)
