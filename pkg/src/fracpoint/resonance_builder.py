"""Constructive zero-energy resonant potentials.

For a positive bump theta the function psi = theta * G_{s,0} is positive
and solves (-Delta)^{s/2} psi = theta, so V = -theta/psi gives
((-Delta)^{s/2} + V) psi = 0 with psi ~ Lambda_s (int theta) |x|^{s-d}:
a zero-energy resonance whenever s - d >= -d/2.  The predicted
Birman-Schwinger eigenvector is phi = -u psi = sqrt(theta psi).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .birman_schwinger import Potential
from .core_math import FractionalParams, Regime
from .discretization import Grid
from .errors import ConfigError, NumericalError
from .green_kernel import riesz_1d


class BumpKind(enum.Enum):
    Gaussian = "gaussian"
    CompactBump = "bump"


@dataclass(frozen=True)
class BumpSpec:
    """Positive source profile theta with total mass ``amplitude``."""

    kind: BumpKind = BumpKind.Gaussian
    width: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if not (self.width > 0 and self.amplitude > 0):
            raise ConfigError("bump width and amplitude must be positive")

    def support_radius(self):
        """Radius beyond which theta vanishes (or is below 1e-300)."""
        if self.kind is BumpKind.CompactBump:
            return self.width
        return self.width * math.sqrt(2 * 700.0)

    def profile(self, d):
        """Vectorised theta(|x|) for dimension d, normalised to unit mass times amplitude."""
        w = self.width
        if self.kind is BumpKind.Gaussian:
            c = self.amplitude * (2 * math.pi * w * w) ** (-d / 2)
            return lambda r: c * np.exp(-np.asarray(r, dtype=float) ** 2 / (2 * w * w))

        def raw(r):
            r = np.abs(np.asarray(r, dtype=float)) / w
            out = np.zeros_like(r)
            m = r < 1
            out[m] = np.exp(1.0 - 1.0 / (1.0 - r[m] ** 2))
            return out

        if d == 1:
            mass = 2 * quad(lambda t: float(raw(t)), 0, w, epsabs=0, epsrel=1e-13)[0]
        else:
            mass = 4 * math.pi * quad(lambda t: t * t * float(raw(t)), 0, w,
                                      epsabs=0, epsrel=1e-13)[0]
        c = self.amplitude / mass
        return lambda r: c * raw(r)


def _psi_3d(theta, s, L, r):
    """(theta * G_{s,0})(r) via the half-line kernel with singular point r' = r."""
    c = riesz_1d(s)

    def kern(rp):
        return c * (abs(r - rp) ** (s - 1) - (r + rp) ** (s - 1)) * rp * float(theta(rp))

    pts = [0.0] + ([r] if r < L else []) + [L]
    val = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        val += quad(kern, a, b, epsabs=0, epsrel=1e-12, limit=200,
                    full_output=1)[0]
    return val / r


def _psi_1d(theta, s, L, x):
    c = riesz_1d(s)
    g = lambda y: float(theta(y))
    if -L < x < L:
        v1 = quad(g, -L, x, weight="alg", wvar=(0.0, s - 1), epsabs=0, epsrel=1e-12, limit=200)[0]
        v2 = quad(g, x, L, weight="alg", wvar=(s - 1, 0.0), epsabs=0, epsrel=1e-12, limit=200)[0]
        return c * (v1 + v2)
    return c * quad(lambda y: abs(x - y) ** (s - 1) * g(y), -L, L, epsabs=0,
                    epsrel=1e-12, limit=200)[0]


def resonance_psi(theta: BumpSpec, s, d):
    """Vectorised callable x -> (theta * G_{s,0})(x)."""
    prof = theta.profile(d)
    L = theta.support_radius()
    one = _psi_3d if d == 3 else _psi_1d

    def psi(x):
        x = np.asarray(x, dtype=float)
        flat = np.array([one(prof, s, L, float(abs(t) if d == 3 else t))
                         for t in x.ravel()])
        return flat.reshape(x.shape)

    return psi


def build_resonant_potential(theta: BumpSpec, s, d, grid: Grid):
    """Return (Potential V, psi, phi) tabulated on ``grid``.

    V = -theta/psi, psi = theta * G_{s,0}, phi = -u psi = sqrt(theta psi).
    The potential's sampler recomputes V at arbitrary points, which the
    shrinking-limit code needs for V(x/eps).
    """
    params = FractionalParams(s, d)
    if params.regime is not Regime.ResonanceDriven:
        raise ConfigError("resonant potentials are built in the resonance-driven "
                          "regime only")
    if grid.dimension != d:
        raise ConfigError("grid dimension does not match d")
    prof = theta.profile(d)
    psi_f = resonance_psi(theta, s, d)
    L = theta.support_radius()

    def sampler(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        th = prof(np.abs(x))
        m = (th > 0) & (np.abs(x) < L)
        if np.any(m):
            ps = psi_f(x[m])
            if np.any(ps <= 0):
                raise NumericalError("psi <= 0 in resonance construction: "
                                     "quadrature failure")
            out[m] = -th[m] / np.maximum(ps, 1e-300)
        return out

    x = grid.nodes
    psi = psi_f(x)
    if np.any(psi <= 0):
        raise NumericalError("psi <= 0 in resonance construction: quadrature failure")
    th = prof(np.abs(x))
    Vvals = -th / np.maximum(psi, 1e-300)
    V = Potential(grid, Vvals, sampler, label=f"resonant({theta.kind.value},s={s},d={d})")
    phi = np.sqrt(th * psi)
    return V, psi, phi
