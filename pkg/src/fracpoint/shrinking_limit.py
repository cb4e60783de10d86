"""Shrinking potentials and their norm-resolvent limits.

For V_eps(x) = eta(eps) eps^{-(s+gamma)/2} V(x/eps) the resolvent of
(-Delta)^{s/2} + V_eps is assembled with the Konno-Kuroda identity and split
into the A/B/C operators of the scaled variable y = x/eps.  Sweeps over eps
compare it with the free resolvent and the predicted point interaction.

Discrete conventions: V_eps is sampled on a fixed grid in x.  The y-grid is
that grid scaled by 1/eps, so nodes are shared and the dilation
(U_eps f)(y) = eps^{d/2} f(eps y) acts as the identity on weighted vectors.
The A/B/C reconstruction is then exact up to roundoff.  Geometric grids
(``make_grid(..., kind="geometric")``) resolve V(x/eps) equally well for
every eps and are the intended choice for sweeps.
"""
from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .birman_schwinger import (Potential, ResonanceReport, _real_eigs,
                               detect_resonance, nearest_to_minus_one)
from .core_math import (Friedrichs, FractionalParams, PointInteraction, Regime,
                        c_coefficient, sin_pi)
from .discretization import Grid, KernelMatrix, hs_norm, kernel_matrix
from .errors import ConfigError, NumericalError
from .point_interaction import (Descriptor, ResolventMatrix, green_vector,
                                rank_one_coefficient)

log = logging.getLogger(__name__)

DEFAULT_EPS = (0.3, 0.2, 0.14, 0.1, 0.07, 0.05)
# condition number above which 1 + u R v is treated as singular
COND_LIMIT = 1e12


class LimitRegime(enum.Enum):
    ThreeDResonant = "3d-res"
    OneDResonant = "1d-res"
    OneDIndependent = "1d-indep"

    @property
    def dimension(self):
        return 3 if self is LimitRegime.ThreeDResonant else 1

    @property
    def resonant(self):
        return self is not LimitRegime.OneDIndependent


class Verdict(enum.Enum):
    ConvergesToFree = "ConvergesToFree"
    ConvergesToPoint = "ConvergesToPoint"
    Inconclusive = "Inconclusive"


@dataclass(frozen=True)
class ScalingScheme:
    """Scaling of V_eps: regime, distortion factor eta and its parameters.

    Without an explicit ``eta`` the defaults are
    eta(eps) = 1 + eta_strength eps^{d-s} (resonant regimes) and
    eta(eps) = eta0 + (1 - eta0) eps (independent regime).  The second has
    eta(1) = 1; the first is the exact expansion without remainder, so
    eta(1) = 1 + eta_strength.
    """

    regime: LimitRegime
    eta_strength: float = 0.0
    eta0: float = 1.0
    eta: Optional[Callable[[float], float]] = None

    def eta_at(self, eps, s) -> float:
        if self.eta is not None:
            return float(self.eta(eps))
        if self.regime.resonant:
            return 1.0 + self.eta_strength * eps ** (self.regime.dimension - s)
        return self.eta0 + (1.0 - self.eta0) * eps

    def gamma(self, s) -> float:
        return s if self.regime.resonant else 2.0 - s

    def check(self, s, d):
        if d != self.regime.dimension:
            raise ConfigError(f"regime {self.regime.value} needs d={self.regime.dimension}")
        reg = FractionalParams(s, d).regime
        want = Regime.ResonanceDriven if self.regime.resonant else Regime.ResonanceIndependent
        if reg is not want:
            raise ConfigError(f"s={s} is {reg.value} in d={d}; regime "
                              f"{self.regime.value} needs {want.value}")


@dataclass
class SweepResult:
    epsilons: np.ndarray
    dist_to_free: np.ndarray
    dist_to_point: np.ndarray
    alpha_predicted: object
    fitted_order: float
    verdict: Verdict
    rank_one_gap: float = float("nan")
    extrapolated: float = float("nan")
    abc_residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dropped: list = field(default_factory=list)
    calibration: float = 1.0

    def as_dict(self):
        a = self.alpha_predicted
        return {
            "epsilons": [float(e) for e in self.epsilons],
            "dist_to_free": [float(x) for x in self.dist_to_free],
            "dist_to_point": [float(x) for x in self.dist_to_point],
            "alpha_predicted": "Friedrichs" if a is Friedrichs else float(a),
            "fitted_order": self.fitted_order,
            "verdict": self.verdict.value,
            "rank_one_gap": self.rank_one_gap,
            "extrapolated": self.extrapolated,
            "abc_residuals": [float(x) for x in self.abc_residuals],
            "dropped": [float(e) for e in self.dropped],
            "calibration": self.calibration,
        }


# ---------------------------------------------------------------- potentials

def scale_potential(V: Potential, eps, scheme: ScalingScheme, s, d,
                    grid: Optional[Grid] = None) -> Potential:
    """V_eps(x) = eta(eps) eps^{-(s+gamma)/2} V(x/eps), sampled on ``grid``."""
    if not eps > 0:
        raise ConfigError("eps must be positive")
    if V.sampler is None:
        raise ConfigError("scaling needs a potential with a sampler")
    grid = V.grid if grid is None else grid
    if grid.dimension != d:
        raise ConfigError("grid dimension does not match d")
    pref = scheme.eta_at(eps, s) * eps ** (-(s + scheme.gamma(s)) / 2)
    f = V.sampler
    samp = lambda x, f=f, e=eps, c=pref: c * f(np.asarray(x, dtype=float) / e)
    return Potential.from_function(samp, grid, label=f"{V.label}@eps={eps}")


# -------------------------------------------------------------- Konno-Kuroda

def konno_kuroda_matrix(R, vals, cond_limit=COND_LIMIT):
    """R - R v (1 + u R v)^{-1} u R for a weighted resolvent matrix R.

    ``vals`` are the nodal values of V (v = |V|^{1/2}, u = sign(V) v).  For
    R = (A + lam)^{-1} this is (A + diag(V) + lam)^{-1}.
    """
    R = np.asarray(R, dtype=float)
    vals = np.asarray(vals, dtype=float)
    v = np.sqrt(np.abs(vals))
    u = np.sign(vals) * v
    if not np.any(v):
        return R.copy()
    mid = np.eye(len(v)) + u[:, None] * R * v[None, :]
    cond = np.linalg.cond(mid)
    if not cond < cond_limit:
        w = _real_eigs(mid - np.eye(len(v)))
        near = float(w[np.argmin(np.abs(w + 1.0))])
        raise NumericalError(
            f"1 + uRv is singular (cond {cond:.3e}); nearest BS eigenvalue to -1 "
            f"is {near:.12g}: lam is (close to) a spectral point")
    Rv = R * v[None, :]
    uR = u[:, None] * R
    out = R - Rv @ np.linalg.solve(mid, uR)
    return 0.5 * (out + out.T)


def konno_kuroda_resolvent(V, s, lam, grid: Grid, eps=None, R=None) -> ResolventMatrix:
    """Resolvent of (-Delta)^{s/2} + V at -lam via the Konno-Kuroda identity."""
    if not lam > 0:
        raise ConfigError("konno_kuroda_resolvent needs lam > 0")
    vals = np.asarray(getattr(V, "values", V), dtype=float)
    if vals.shape != (grid.n,):
        raise ConfigError("potential values do not match the grid")
    if R is None:
        R = kernel_matrix(s, lam, grid)
    M = konno_kuroda_matrix(R, vals)
    return ResolventMatrix(KernelMatrix(M, True, float(s), float(lam), grid.dimension),
                           float(lam), Descriptor("KonnoKuroda", eps=eps))


def outer_prefactor(eps, scheme: ScalingScheme, s, d) -> float:
    """Scalar in front of A (1+B)^{-1} C: eta(eps) eps^{d-(s+gamma)/2}."""
    return scheme.eta_at(eps, s) * eps ** (d - (s + scheme.gamma(s)) / 2)


def abc_operators(V: Potential, eps, s, lam, scheme: ScalingScheme, grid: Grid, R=None):
    """(A, B, C) for V_eps; x lives on ``grid``, y on ``grid.scaled(1/eps)``.

    A(x, y) = G_{s,lam}(x - eps y) v(y), C(x, y) = u(x) G_{s,lam}(eps x - y),
    B(x, y) = eta(eps) eps^{(s-gamma)/2} u(x) G_{s,lam eps^s}(x - y) v(y),
    so that the resolvent of V_eps equals
    R - outer_prefactor * A (1 + B)^{-1} C.
    """
    if not (eps > 0 and lam > 0):
        raise ConfigError("abc_operators needs eps > 0 and lam > 0")
    d = grid.dimension
    if R is None:
        R = kernel_matrix(s, lam, grid)
    ygrid = grid.scaled(1.0 / eps)
    Vy = V.on_grid(ygrid).values
    v = np.sqrt(np.abs(Vy))
    u = np.sign(Vy) * v
    c = eps ** (-d / 2)
    A = c * R * v[None, :]
    C = c * u[:, None] * R
    pref = scheme.eta_at(eps, s) * eps ** ((s - scheme.gamma(s)) / 2)
    By = kernel_matrix(s, lam * eps ** s, ygrid)
    B = pref * u[:, None] * By * v[None, :]
    km = lambda M: KernelMatrix(M, False, float(s), float(lam), d)
    return km(A), km(B), km(C)


def abc_reconstruction(A, B, C, R, prefactor):
    """R - prefactor * A (1 + B)^{-1} C."""
    a, b, c = (getattr(M, "entries", M) for M in (A, B, C))
    return R - prefactor * a @ np.linalg.solve(np.eye(len(b)) + b, c)


# ---------------------------------------------------------- expansion checks

def _check_resonant(scheme, s, d):
    if not scheme.regime.resonant:
        raise ConfigError("this check applies to the resonant regimes only")
    scheme.check(s, d)


def b_expansion_check(V: Potential, s, lam, scheme: ScalingScheme, grid: Grid,
                      eps_list=DEFAULT_EPS):
    """Residual of the first-order expansion of B_eps around B_0, per eps.

    With mu = lam^{1/s} and t = (mu eps)^{d-s} the residual is
    || (B_eps - B_0)/t - (eta_s/mu^{d-s} B_0 + c_d |u><v|) ||_HS.
    Returns ``(residuals, fitted_order)``, the order being the log-log slope
    over all sampled eps.
    """
    d = grid.dimension
    _check_resonant(scheme, s, d)
    mu = lam ** (1.0 / s)
    cd = c_coefficient(s, d)
    res = []
    for eps in eps_list:
        ygrid = grid.scaled(1.0 / eps)
        Vy = V.on_grid(ygrid).values
        v = np.sqrt(np.abs(Vy))
        u = np.sign(Vy) * v
        B0 = u[:, None] * kernel_matrix(s, 0.0, ygrid) * v[None, :]
        Be = scheme.eta_at(eps, s) * u[:, None] * kernel_matrix(s, lam * eps ** s, ygrid) * v[None, :]
        t = (mu * eps) ** (d - s)
        uv = np.outer(ygrid.to_vec(u), ygrid.to_vec(v))
        lead = scheme.eta_strength / mu ** (d - s) * B0 + cd * uv
        res.append(hs_norm((Be - B0) / t - lead))
    res = np.array(res)
    order = float(np.polyfit(np.log(eps_list), np.log(res), 1)[0]) if len(res) > 1 else float("nan")
    return res, order


@dataclass
class CentralLimitResult:
    epsilons: np.ndarray
    distances: np.ndarray
    singular_ratio: np.ndarray
    coefficient_numeric: np.ndarray
    coefficient_predicted: float


def central_limit_coefficient(coupling, s, mu, eta_strength, d) -> float:
    """(eta_s/mu^{d-s} + c_d <v,phi>^2)^{-1}."""
    return 1.0 / (eta_strength / mu ** (d - s) + c_coefficient(s, d) * coupling ** 2)


def central_limit_check(V: Potential, phi, s, mu, eta_strength, grid: Grid,
                        eps_list=DEFAULT_EPS, scheme: Optional[ScalingScheme] = None):
    """Compare (mu eps)^{d-s} (1 + B_eps)^{-1} with kappa^{-1} |phi><phi~|.

    ``phi`` holds nodal values of the normalised resonance eigenfunction
    (<sign(V) phi, phi> = -1) on ``grid``, ``V`` must be calibrated.  On each
    y-grid the eigenfunction is recomputed from B_0 there and normalised the
    same way with the sign fixed by the overlap with ``phi``.  Sampled eps at
    which 1 + B_eps is singular are skipped with a warning.
    """
    d = grid.dimension
    if scheme is None:
        scheme = ScalingScheme(LimitRegime.ThreeDResonant if d == 3 else LimitRegime.OneDResonant,
                               eta_strength=eta_strength)
    _check_resonant(scheme, s, d)
    lam = mu ** s
    phi = np.asarray(phi, dtype=float)
    vals = V.values
    coupling = float(grid.to_vec(np.sqrt(np.abs(vals))) @ grid.to_vec(phi))
    kappa_inv = central_limit_coefficient(coupling, s, mu, eta_strength, d)
    eps_out, dist, ratio, coef = [], [], [], []
    for eps in eps_list:
        ygrid = grid.scaled(1.0 / eps)
        Vy = V.on_grid(ygrid)
        v = Vy.v
        u = Vy.u
        Be = scheme.eta_at(eps, s) * u[:, None] * kernel_matrix(s, lam * eps ** s, ygrid) * v[None, :]
        mid = np.eye(ygrid.n) + Be
        if not np.linalg.cond(mid) < COND_LIMIT:
            warnings.warn(f"1 + B_eps singular at eps={eps}; skipped", RuntimeWarning)
            continue
        X = (mu * eps) ** (d - s) * np.linalg.inv(mid)
        _, vec, _ = nearest_to_minus_one(Vy, s, ygrid)
        sg = np.sign(Vy.values)
        vec = vec / math.sqrt(-float(np.sum(sg * vec ** 2)))
        if vec @ ygrid.to_vec(phi) < 0:
            vec = -vec
        tilde = sg * vec
        pred = kappa_inv * np.outer(vec, tilde)
        sv = np.linalg.svd(X, compute_uv=False)
        eps_out.append(eps)
        dist.append(hs_norm(X - pred))
        ratio.append(float(sv[1] / sv[0]))
        coef.append(float(tilde @ X @ vec))
    return CentralLimitResult(np.array(eps_out), np.array(dist), np.array(ratio),
                              np.array(coef), kappa_inv)


# ------------------------------------------------------------- predictions

def predicted_alpha(V, report: Optional[ResonanceReport], scheme: ScalingScheme, d):
    """Extension parameter of the predicted limit (a float or Friedrichs)."""
    if scheme.regime.dimension != d:
        raise ConfigError("scheme and dimension disagree")
    if scheme.regime.resonant:
        if report is None or not report.is_resonant:
            return Friedrichs
        if report.coupling == 0:
            return Friedrichs
        return -scheme.eta_strength / report.coupling ** 2
    integral = float(getattr(V, "integral", V))
    eta0 = float(scheme.eta(0.0)) if scheme.eta is not None else scheme.eta0
    prod = eta0 * integral
    if prod == 0:
        raise ConfigError("alpha undefined (infinite): limit is Friedrichs")
    return -1.0 / prod


def exceptional_lambda(V, eta0, s) -> Optional[float]:
    """lam* solving 1 + eta0 int V / (lam^{1-1/s} s sin(pi/s)) = 0, or None."""
    if not (1.0 < s < 1.5):
        raise ConfigError("exceptional_lambda needs d=1, s in (1, 3/2)")
    integral = float(getattr(V, "integral", V))
    prod = eta0 * integral
    if prod >= 0:
        return None
    alpha = -1.0 / prod
    return (alpha * s * sin_pi(1.0 / s)) ** (s / (1.0 - s))


# ------------------------------------------------------------------- sweeps

def _richardson(eps, dist):
    """Limit D_inf of D(eps) = D_inf + C eps^p fitted through three points."""
    e1, e2, e3 = eps
    d1, d2, d3 = dist
    q = (d1 - d2) / (d2 - d3) if d2 != d3 else float("inf")

    def f(p):
        return (e1 ** p - e2 ** p) / (e2 ** p - e3 ** p) - q

    try:
        p = brentq(f, 1e-3, 8.0)
    except (ValueError, ZeroDivisionError):
        return float(d3), float("nan")
    a, b = e2 ** p, e3 ** p
    return float((d3 * a - d2 * b) / (a - b)), float(p)


def _strictly_decreasing_in_eps(dist):
    # dist ordered by decreasing eps: values must decrease along the list
    return bool(np.all(np.diff(dist) < 0))


def calibrate(V: Potential, s, grid: Grid):
    """(V / |mu*|, report) when V is detected resonant, otherwise (V, report)."""
    rep = detect_resonance(V, s, grid)
    if not rep.is_resonant:
        return V, rep, 1.0
    factor = 1.0 / abs(rep.nearest_eigenvalue)
    Vc = V.scaled(factor)
    rep_c = detect_resonance(Vc, s, grid, tol=rep.tol)
    return Vc, rep_c, factor


def convergence_sweep(V: Potential, scheme: ScalingScheme, s, d, lam,
                      eps_list=DEFAULT_EPS, grid: Optional[Grid] = None,
                      calibrate_resonance=True, report=None) -> SweepResult:
    """Distances of the V_eps resolvent to the free and point resolvents, per eps."""
    grid = V.grid if grid is None else grid
    scheme.check(s, d)
    if not lam > 0:
        raise ConfigError("lam must be positive")
    eps_list = sorted((float(e) for e in eps_list), reverse=True)
    factor = 1.0
    if scheme.regime.resonant and np.any(V.values):
        if calibrate_resonance:
            V, report, factor = calibrate(V, s, grid)
        elif report is None:
            report = detect_resonance(V, s, grid)
        alpha = predicted_alpha(V, report, scheme, d)
    elif np.any(V.values):
        alpha = predicted_alpha(V, None, scheme, d)
    else:
        alpha = Friedrichs
    R = kernel_matrix(s, lam, grid)
    norm_R = hs_norm(R)
    if alpha is Friedrichs:
        P = R
        gap = 0.0
    else:
        pi = PointInteraction(FractionalParams(s, d), alpha)
        coef = rank_one_coefficient(pi, lam)
        g = green_vector(s, lam, grid)
        P = R + coef * np.outer(g, g)
        gap = abs(coef) * float(g @ g)
    eps_ok, dfree, dpoint, resid, dropped = [], [], [], [], []
    for eps in eps_list:
        Ve = scale_potential(V, eps, scheme, s, d, grid)
        try:
            K = konno_kuroda_matrix(R, Ve.values)
        except NumericalError as exc:
            log.warning("eps=%g dropped: %s", eps, exc)
            dropped.append(eps)
            continue
        if np.any(V.values):
            A, B, C = abc_operators(V, eps, s, lam, scheme, grid, R=R)
            rec = abc_reconstruction(A, B, C, R, outer_prefactor(eps, scheme, s, d))
            resid.append(hs_norm(rec - K) / norm_R)
        else:
            resid.append(0.0)
        eps_ok.append(eps)
        dfree.append(hs_norm(K - R))
        dpoint.append(hs_norm(K - P))
    eps_a, dfree, dpoint = np.array(eps_ok), np.array(dfree), np.array(dpoint)
    order, extrap, verdict = float("nan"), float("nan"), Verdict.Inconclusive
    if len(eps_a) >= 3:
        tail_e, tail_p, tail_f = eps_a[-3:], dpoint[-3:], dfree[-3:]
        if np.all(tail_p > 0):
            order = float(np.polyfit(np.log(tail_e), np.log(tail_p), 1)[0])
        if alpha is not Friedrichs:
            extrap, _ = _richardson(tail_e, tail_p)
            if _strictly_decreasing_in_eps(tail_p) and abs(extrap) <= 0.05 * gap:
                verdict = Verdict.ConvergesToPoint
        if verdict is Verdict.Inconclusive:
            if not np.any(dfree):
                verdict, extrap = Verdict.ConvergesToFree, 0.0
            else:
                ef, _ = _richardson(tail_e, tail_f)
                if _strictly_decreasing_in_eps(tail_f) and abs(ef) <= 0.05 * dfree[0]:
                    verdict = Verdict.ConvergesToFree
                if alpha is Friedrichs:
                    extrap = ef
    return SweepResult(eps_a, dfree, dpoint, alpha, order, verdict, gap, extrap,
                       np.array(resid), dropped, factor)
