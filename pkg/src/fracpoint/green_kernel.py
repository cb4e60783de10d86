"""Green function of (-Delta)^{s/2} + lam in d = 1 and d = 3.

Convention::

    G_{s,lam}(x) = (2 pi)^{-d} int_{R^d} e^{ipx} / (|p|^s + lam) dp

In singular regimes (s < d) the value is returned through the split
G = Lambda_s |x|^{s-d} + J_{s,lam}, where the correction J has an
absolutely convergent Fourier representation.  Oscillatory half-line
integrals are done after the substitution q = p|x| (unit frequency): an
adaptive Gauss-Kronrod pass on [0, 2 pi] followed by QUADPACK's QAWF
(cycle-by-cycle integration with epsilon-algorithm acceleration of the
alternating tail) on [2 pi, infinity).

Besides the pointwise, error-controlled :func:`green`, the module provides
:class:`Green1DTable`, a vectorised evaluator of the one-dimensional kernel
used for matrix assembly (the 3D radial sector reduces to 1D kernels, see
:mod:`fracpoint.discretization`).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.integrate import quad

from .core_math import (FractionalParams, Regime, c_coefficient,
                        lambda_s_constant, sin_pi)
from .errors import ConfigError, NumericalError

S_MAX = 2.5


class GreenMethod(enum.Enum):
    ClosedForm = "closed-form"
    SplitQuadrature = "split-quadrature"
    SeriesNearZero = "series-near-zero"


@dataclass(frozen=True)
class GreenEval:
    r: float
    value: float
    abs_err_estimate: float
    method: GreenMethod


# ---------------------------------------------------------------------------
# quadrature primitives

def _osc_integral(f, kind, scale=1.0, alg=None):
    """int_0^inf f(q) w(q) dq with w = cos or sin; returns (value, err).

    ``scale`` is the width of the structure of f near q = 0 (the integrands
    here peak on q ~ lam^{1/s}|x|); [0, 2 pi] is cut at geometric
    breakpoints starting there.  If ``alg = (alpha, g)`` is given then
    f(q) = q^alpha g(q) and the first segment uses an algebraic weight so
    the endpoint singularity is integrated exactly.
    """
    w = math.cos if kind == "cos" else math.sin
    top = 2 * math.pi
    cuts = [0.0]
    c = min(scale, top / 10)
    while c < top:
        cuts.append(c)
        c *= 10.0
    cuts.append(top)
    val = err = 0.0
    for i, (a, b) in enumerate(zip(cuts[:-1], cuts[1:])):
        if i == 0 and alg is not None:
            alpha, g = alg
            v, e, *_ = quad(lambda q: g(q) * w(q), a, b,
                            weight="alg", wvar=(alpha, 0.0), limit=400,
                            epsabs=0.0, epsrel=1e-13, full_output=1)
        else:
            v, e, *_ = quad(lambda q: f(q) * w(q), a, b, limit=400,
                            epsabs=0.0, epsrel=1e-13, full_output=1)
        val += v
        err += abs(e)
    v2, e2, *_ = quad(f, top, np.inf, weight=kind, wvar=1.0, limlst=200,
                      limit=400, epsabs=1e-15, full_output=1)
    return val + v2, err + abs(e2)


def riesz_1d(sigma):
    """1D constant: (2pi)^{-1} int e^{ipx}|p|^{-sigma} dp = riesz_1d * |x|^{sigma-1}.

    Written as 1/(2 Gamma(sigma) cos(pi sigma/2)) (reflection plus
    duplication), which stays finite for large sigma.
    """
    return 1.0 / (2.0 * math.gamma(sigma) * math.cos(math.pi * sigma / 2))


def _check_domain(params: FractionalParams):
    s, d = params.s, params.d
    lo = 0.5 if d == 1 else 1.0
    if not (lo < s < S_MAX):
        raise ConfigError(f"green: d={d} needs s in ({lo}, {S_MAX}), got s={s}")


def _g1_positive_quad(s, lam, x):
    """1D G for s >= 1 by direct quadrature, x != 0, lam > 0."""
    b = lam * x ** s
    v, e = _osc_integral(lambda q: 1.0 / (q ** s + b), "cos",
                         scale=b ** (1 / s))
    pref = x ** (s - 1) / math.pi
    return pref * v, pref * e


def _g1_at_zero(s, lam):
    """(1/pi) int_0^inf dp/(p^s+lam) for s > 1 by non-oscillatory quadrature."""
    # [0,1] plain;  [1,inf) with p = 1/t gives int_0^1 t^{s-2}/(1+lam t^s) dt
    v1, e1, *_ = quad(lambda p: 1.0 / (p ** s + lam), 0.0, 1.0, epsabs=0,
                      epsrel=2e-14, limit=200, full_output=1)
    v2, e2, *_ = quad(lambda t: 1.0 / (1.0 + lam * t ** s), 0.0, 1.0,
                      weight="alg", wvar=(s - 2.0, 0.0), epsabs=0,
                      epsrel=2e-14, limit=200, full_output=1)
    return (v1 + v2) / math.pi, (abs(e1) + abs(e2)) / math.pi


def _j1_quad(s, lam, x):
    """1D correction J for s < 1: -(lam/pi) int cos(px)/(p^s(p^s+lam)) dp."""
    if x == 0.0:
        v, e, *_ = quad(lambda p: 1.0 / (p ** s * (p ** s + lam)), 0.0, np.inf,
                        epsabs=0, epsrel=1e-13, limit=400, full_output=1)
        return -lam / math.pi * v, lam / math.pi * abs(e)
    b = lam * x ** s
    v, e = _osc_integral(lambda q: q ** (-s) / (q ** s + b), "cos",
                         scale=b ** (1 / s), alg=(-s, lambda q: 1.0 / (q ** s + b)))
    pref = lam * x ** (2 * s - 1) / math.pi
    return -pref * v, pref * e


def _j3_quad(s, lam, r):
    """3D correction J = -lam/(2pi^2 r) int p^{1-s} sin(pr)/(p^s+lam) dp."""
    b = lam * r ** s
    v, e = _osc_integral(lambda q: q ** (1 - s) / (q ** s + b), "sin",
                         scale=b ** (1 / s))
    pref = lam * r ** (2 * s - 3) / (2 * math.pi ** 2)
    return -pref * v, pref * e


# ---------------------------------------------------------------------------
# small-argument series (lam = 1, argument t = lam^{1/s}|x|)

def _series_terms(s, max_exponent=2.0):
    """Power terms (coef, exponent) of G_{s,1}^{(1D)}(t) with exponent < max.

    G = sum_k (-1)^k riesz_1d(s(k+1)) t^{s(k+1)-1} + sum_m c_m t^{2m},
    c_m = (-1)^m / ((2m)! s sin(pi(2m+1)/s)).  When an exponent s(k+1)-1 is
    within 0.05 of an even integer 2m both coefficients have cancelling poles
    (a logarithmic term appears in the limit); the pair is dropped, so
    callers keep t small enough that t^(2m) is negligible.
    """
    k_exps = [s * (k + 1) - 1.0 for k in range(int(max_exponent / s) + 2)]
    terms = []
    for m in range(int(math.ceil(max_exponent / 2))):
        if all(abs(a - 2 * m) > 0.05 for a in k_exps):
            c = (-1) ** m / (math.factorial(2 * m) * s * sin_pi((2 * m + 1) / s))
            terms.append((c, float(2 * m)))
    for k, a in enumerate(k_exps):
        if a >= max_exponent:
            break
        if all(abs(a - 2 * m) > 0.05 for m in range(int(max_exponent) + 2)):
            terms.append(((-1) ** k * riesz_1d(s * (k + 1)), a))
    return terms


def _series_eval(s, t, include_principal):
    """Series value of G_{s,1} (or of J_{s,1} if the principal term is excluded)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for c, a in _series_terms(s):
        if not include_principal and abs(a - (s - 1.0)) < 1e-15:
            continue
        out += c * t ** a if a != 0 else c
    return out


# ---------------------------------------------------------------------------
# pointwise API

def green_zero(params: FractionalParams, x) -> float:
    """Zero-energy kernel Lambda_s |x|^{s-d} (exact)."""
    lam_s = lambda_s_constant(params)
    x = abs(float(x))
    if x == 0.0:
        raise ConfigError("pointwise singular: G_{s,0} diverges at x = 0")
    return lam_s * x ** (params.s - params.d)


def _closed_form_s2(d, lam, x):
    k = math.sqrt(lam)
    if d == 3:
        return math.exp(-k * x) / (4 * math.pi * x)
    return math.exp(-k * x) / (2 * k)


def j_correction(params: FractionalParams, lam, x) -> GreenEval:
    """Smooth part J_{s,lam} = G_{s,lam} - Lambda_s |x|^{s-d} (s < d only)."""
    _check_domain(params)
    s, d = params.s, params.d
    if s >= d:
        raise ConfigError("J is defined only when s < d")
    if lam < 0:
        raise ConfigError("lam must be >= 0")
    x = abs(float(x))
    if lam == 0:
        return GreenEval(x, 0.0, 0.0, GreenMethod.ClosedForm)
    if d == 1:
        v, e = _j1_quad(s, lam, x)
    else:
        if x == 0.0:
            # J_3(0) = -lam/(2 pi^2) int p^{2-s}/(p^s+lam) dp ... use the
            # scaling J_{s,lam}(0) = lam^{3/s-1} J_{s,1}(0) with the series
            v = lam ** (3 / s - 1) * _j3_at_zero(s)
            return GreenEval(0.0, v, 1e-14 * abs(v), GreenMethod.SeriesNearZero)
        v, e = _j3_quad(s, lam, x)
    return GreenEval(x, v, e, GreenMethod.SplitQuadrature)


def _j3_at_zero(s):
    # G_3(r) = -G_1'(r)/(2 pi r) maps the t^2 term of the 1D series onto the
    # constant term of J_3, which is c_3(s) at lam = 1
    return c_coefficient(s, 3)


def green(params: FractionalParams, lam, x, method: GreenMethod | None = None) -> GreenEval:
    """Evaluate G_{s,lam}(x) with an error estimate.

    ``x`` is the signed coordinate in 1D and the radius in 3D.  ``method``
    forces a strategy; by default s = 2 uses the closed form, lam = 0 the
    exact power law, very small lam^{1/s}|x| the near-zero series and
    everything else split quadrature.
    """
    _check_domain(params)
    s, d = params.s, params.d
    lam = float(lam)
    if lam < 0:
        raise ConfigError("lam must be >= 0")
    r = abs(float(x))
    if r == 0.0:
        if s <= d:
            raise ConfigError("pointwise singular: G_{s,lam}(0) diverges for s <= d")
        if lam == 0.0:
            raise ConfigError(
                "zero-energy kernel unbounded at origin only through lam: "
                "G_{s,0}(0) diverges")
    if lam == 0.0:
        if s >= d:
            raise ConfigError(
                "zero-energy kernel unbounded at origin only through lam: "
                "G_{s,0} is not defined for s >= d")
        v = green_zero(params, r)
        return GreenEval(r, v, 4e-16 * abs(v), GreenMethod.ClosedForm)

    if method is None:
        if s == 2.0:
            method = GreenMethod.ClosedForm
        elif lam ** (1 / s) * r < 1e-7 and s != 1.0:
            method = GreenMethod.SeriesNearZero
        else:
            method = GreenMethod.SplitQuadrature

    if method is GreenMethod.ClosedForm:
        if s != 2.0:
            raise ConfigError("closed form available only for s = 2")
        v = _closed_form_s2(d, lam, r)
        return GreenEval(r, v, 4e-16 * abs(v), method)

    if method is GreenMethod.SeriesNearZero:
        if d == 3:
            raise ConfigError("series evaluation is implemented for d = 1 only")
        t = lam ** (1 / s) * r
        if t > 1e-3:
            raise ConfigError("series evaluation needs lam^{1/s}|x| <= 1e-3")
        v = lam ** (1 / s - 1) * float(_series_eval(s, t, include_principal=True))
        return GreenEval(r, v, 1e-13 * abs(v) + abs(t) ** 1.9 * abs(v), method)

    # split quadrature
    if d == 1:
        if s >= 1.0:
            if r == 0.0:
                v, e = _g1_at_zero(s, lam)
            else:
                v, e = _g1_positive_quad(s, lam, r)
            return GreenEval(r, v, e, GreenMethod.SplitQuadrature)
        j, e = _j1_quad(s, lam, r)
        v = lambda_s_constant(params) * r ** (s - 1) + j
        return GreenEval(r, v, e, GreenMethod.SplitQuadrature)
    j, e = _j3_quad(s, lam, r)
    v = lambda_s_constant(params) * r ** (s - 3) + j
    return GreenEval(r, v, e, GreenMethod.SplitQuadrature)


def green_at_zero_closed_form(s, lam):
    """G_{s,lam}(0) in 1D for s > 1: (lam^{1-1/s} s sin(pi/s))^{-1}."""
    return 1.0 / (lam ** (1 - 1 / s) * s * sin_pi(1 / s))


def small_lambda_ratio(params: FractionalParams, lam, x) -> float:
    """(G_{s,lam}(x) - G_{s,0}(x)) / (c_d lam^{d/s-1}); tends to 1 as lam -> 0."""
    if params.regime is not Regime.ResonanceDriven:
        raise ConfigError("small_lambda_ratio needs a resonance-driven (s, d)")
    if not lam > 0:
        raise ConfigError("lam must be > 0")
    if float(x) == 0.0:
        raise ConfigError("x must be nonzero")
    s, d = params.s, params.d
    j = j_correction(params, lam, x).value
    return j / (c_coefficient(s, d) * lam ** (d / s - 1))


# ---------------------------------------------------------------------------
# tabulated 1D kernel for matrix assembly

class Green1DTable:
    """Vectorised 1D kernel for fixed s in (1/2, 1) or (1, 5/2).

    Tabulates the smooth function T_{s,1}(t): the full G_{s,1}(t) when
    s > 1, and J_{s,1}(t) when s < 1 (the principal term riesz_1d(s) t^{s-1}
    is then added analytically).  Other lam follow from the scaling
    T_{s,lam}(x) = lam^{1/s-1} T_{s,1}(lam^{1/s} x).

    Representation in t >= 0:
      * t < T_SMALL: near-zero series,
      * T_SMALL <= t <= T_LARGE: piecewise Chebyshev in u = ln t, fitted to
        quadrature values,
      * t > T_LARGE: optimally truncated large-t asymptotic expansion.
    """

    T_SMALL = 1e-7
    T_LARGE = 40.0
    PANEL = 1.0
    DEGREE = 22

    def __init__(self, s: float):
        if not (0.5 < s < S_MAX) or abs(s - 1.0) < 1e-9:
            raise ConfigError(f"Green1DTable needs s in (1/2,1) or (1,{S_MAX}), got {s}")
        self.s = float(s)
        self.principal = riesz_1d(s) if s < 1 else 0.0
        self.exact_s2 = (s == 2.0)
        self.value_at_zero = 1.0 / (s * sin_pi(1.0 / s))
        terms = _series_terms(s)
        # cusp terms of T (non-integer exponents below 2), used for
        # singularity subtraction in the matrix assembly
        self.cusp_terms = [(c, a) for c, a in terms
                           if abs(a / 2 - round(a / 2)) > 1e-12 and not
                           (s < 1 and abs(a - (s - 1)) < 1e-15)]
        self.max_fit_error = 0.0
        if not self.exact_s2:
            self._build()

    # -- construction
    def _quad_value(self, t):
        s = self.s
        if s > 1:
            return _g1_positive_quad(s, 1.0, t)[0]
        return _j1_quad(s, 1.0, t)[0]

    def _build(self):
        u0, u1 = math.log(self.T_SMALL), math.log(self.T_LARGE)
        npan = int(math.ceil((u1 - u0) / self.PANEL))
        self._edges = np.linspace(u0, u1, npan + 1)
        nodes = np.cos(np.pi * (np.arange(self.DEGREE + 1) + 0.5) / (self.DEGREE + 1))
        self._coefs = []
        for a, b in zip(self._edges[:-1], self._edges[1:]):
            uu = 0.5 * (a + b) + 0.5 * (b - a) * nodes
            vals = np.array([self._quad_value(math.exp(u)) for u in uu])
            cf = C.chebfit(nodes, vals, self.DEGREE)
            self._coefs.append(cf)
            # trailing coefficients size is the truncation indicator
            tail = np.max(np.abs(cf[-3:])) / max(np.max(np.abs(vals)), 1e-300)
            self.max_fit_error = max(self.max_fit_error, tail)
        self._coefs = np.array(self._coefs)
        self._asym_k = np.arange(1, 80)
        if self.max_fit_error > 1e-10:
            raise NumericalError(f"Green table fit for s={self.s} is inaccurate "
                                 f"({self.max_fit_error:.2e})")

    # -- evaluation at lam = 1
    def _asymptotic(self, t):
        s = self.s
        k = self._asym_k[:, None]
        lg = np.array([math.lgamma(s * kk + 1) for kk in self._asym_k])[:, None]
        logb = lg - (s * k + 1) * np.log(t)[None, :]
        # truncate just before the smallest bound term
        kmin = np.argmin(logb, axis=0)
        sgn = np.array([(-1) ** kk * sin_pi(s * kk / 2) for kk in self._asym_k])[:, None]
        terms = -sgn * np.exp(logb) / math.pi
        mask = k - 1 < kmin[None, :]
        g = np.sum(np.where(mask, terms, 0.0), axis=0)
        if s < 1:
            g = g - self.principal * t ** (s - 1)
        return g

    def smooth_unit(self, t):
        """T_{s,1}(t) for t >= 0 (vectorised)."""
        t = np.abs(np.asarray(t, dtype=float))
        if self.exact_s2:
            return 0.5 * np.exp(-t)
        out = np.empty_like(t)
        small = t < self.T_SMALL
        large = t > self.T_LARGE
        mid = ~(small | large)
        if np.any(small):
            out[small] = _series_eval(self.s, t[small], include_principal=(self.s > 1))
        if np.any(large):
            out[large] = self._asymptotic(t[large])
        if np.any(mid):
            u = np.log(t[mid])
            idx = np.clip(((u - self._edges[0]) / (self._edges[1] - self._edges[0])).astype(int),
                          0, len(self._coefs) - 1)
            a = self._edges[idx]
            b = self._edges[idx + 1]
            z = (2 * u - a - b) / (b - a)
            res = np.empty_like(u)
            for p in np.unique(idx):
                sel = idx == p
                res[sel] = C.chebval(z[sel], self._coefs[p])
            out[mid] = res
        return out

    # -- evaluation at general lam
    def smooth(self, lam, x):
        """T_{s,lam}(x) (full G for s > 1, J for s < 1)."""
        s = self.s
        if lam == 0:
            if s > 1:
                raise ConfigError("1D kernel with s > 1 needs lam > 0")
            return np.zeros_like(np.asarray(x, dtype=float))
        k = lam ** (1.0 / s)
        return lam ** (1.0 / s - 1.0) * self.smooth_unit(k * np.asarray(x, dtype=float))

    def kernel(self, lam, x):
        """Full G_{s,lam}(x); for s > 1 and lam = 0 the principal power law only."""
        x = np.abs(np.asarray(x, dtype=float))
        s = self.s
        if s > 1:
            if lam == 0:
                return riesz_1d(s) * x ** (s - 1)
            return self.smooth(lam, x)
        with np.errstate(divide="ignore"):
            return self.principal * x ** (s - 1) + self.smooth(lam, x)

    def cusp_terms_at(self, lam):
        """Non-smooth power terms (coef, exponent) of the kernel at this lam.

        These are the terms integrated exactly in the singularity
        subtraction; the remainder kernel is then C^2 at the origin except
        for terms of exponent >= 2.
        """
        s = self.s
        out = []
        if s < 1:
            out.append((self.principal, s - 1.0))
        else:
            if lam == 0:
                return [(riesz_1d(s), s - 1.0)]
        if lam == 0:
            return out
        for c, a in self.cusp_terms:
            out.append((c * lam ** (1.0 / s - 1.0) * lam ** (a / s), a))
        return out

    def remainder_at_zero(self, lam):
        """Value at 0 of kernel minus all cusp terms (the regular part)."""
        if lam == 0:
            return 0.0
        return lam ** (1.0 / self.s - 1.0) * self.value_at_zero


@lru_cache(maxsize=16)
def green_table(s: float) -> Green1DTable:
    """Cached :class:`Green1DTable` for exponent ``s``."""
    return Green1DTable(float(s))
