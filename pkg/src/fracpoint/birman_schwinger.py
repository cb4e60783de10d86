"""Birman-Schwinger spectra, resonance detection and potential norms.

With v = |V|^{1/2} and u = v sign V the zero-energy Birman-Schwinger operator
is B0 = u (-Delta)^{-s/2} v.  A zero-energy resonance is an eigenvalue -1 of
B0 whose eigenvector phi couples to v, <v, phi> != 0; in that case
psi = G_{s,0} * (v phi) behaves like Lambda_s <v, phi> |x|^{s-d} and is not
square integrable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core_math import FractionalParams, lambda_s_constant
from .discretization import (Grid, _power_domain_integral, assemble_bs_matrix,
                             kernel_matrix)
from .errors import ConfigError, NumericalError


@dataclass(frozen=True)
class PotentialNorms:
    l1: float
    weighted_l1: float
    rollnick: float


@dataclass
class Potential:
    """Real potential tabulated on a grid, optionally with a sampler.

    The sampler (a vectorised callable of position, radius in 3D) is needed
    for anything that evaluates V off the grid: refinement studies and the
    scaled potentials of the shrinking limit.
    """

    grid: Grid
    values: np.ndarray
    sampler: Optional[Callable] = None
    label: str = ""
    _norm_cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_function(cls, f, grid: Grid, label=""):
        vals = np.asarray(f(grid.nodes), dtype=float)
        return cls(grid, vals, f, label)

    @property
    def v(self):
        return np.sqrt(np.abs(self.values))

    @property
    def u(self):
        return np.sign(self.values) * self.v

    @property
    def integral(self) -> float:
        """Signed integral of V over the domain."""
        return self.grid.integrate(self.values)

    def scaled(self, c) -> "Potential":
        f = self.sampler
        samp = None if f is None else (lambda x, f=f, c=c: c * f(x))
        return Potential(self.grid, c * self.values, samp, self.label)

    def on_grid(self, grid: Grid) -> "Potential":
        if self.sampler is None:
            raise ConfigError("potential has no sampler; cannot resample")
        return Potential.from_function(self.sampler, grid, self.label)

    def norms(self, s) -> PotentialNorms:
        key = float(s)
        if key not in self._norm_cache:
            g = self.grid
            x = np.abs(g.nodes)
            a = np.abs(self.values)
            l1 = g.integrate(a)
            wl1 = g.integrate(a * (1 + x ** 2) ** ((2 * s - g.dimension) / 2))
            rn = rollnick_norm(self, s, g.dimension)
            self._norm_cache[key] = PotentialNorms(l1, wl1, rn)
        return self._norm_cache[key]


def _values(V):
    return np.asarray(getattr(V, "values", V), dtype=float)


def rollnick_norm(V: Potential, s, d) -> float:
    """sqrt of  int int |V(x)||V(y)| / |x-y|^{2(d-s)} dx dy.

    1D uses the node rule with exact subtraction of the power singularity; 3D
    first integrates both angles exactly, which leaves the radial kernel
    8 pi^2 r r' ((r+r')^b - |r-r'|^b)/b with b = 2s - 4 (a logarithm at s=2).
    """
    grid = V.grid
    if grid.dimension != d:
        raise ConfigError("grid dimension does not match d")
    if not (d / 2 < s < d):
        raise ConfigError(f"rollnick_norm needs s in ({d/2}, {d})")
    a = np.abs(_values(V))
    if not np.any(a):
        return 0.0
    x = grid.nodes
    lw = grid.line_weights
    n = len(x)
    diff = np.abs(x[:, None] - x[None, :])
    off = ~np.eye(n, dtype=bool)
    if d == 1:
        lo, hi = -grid.cutoff, grid.cutoff
        terms = [(1.0, 2 * s - 2)]
        f = a
        regular = None
        pref = 1.0
    else:
        lo, hi = 0.0, grid.cutoff
        b = 2 * s - 4
        f = x * a
        if abs(b) < 1e-12:
            terms = [(-1.0, "log")]
            regular = np.log(x[:, None] + x[None, :])
            pref = 8 * math.pi ** 2
        else:
            terms = [(-1.0, b)]
            regular = (x[:, None] + x[None, :]) ** b
            pref = 8 * math.pi ** 2 / b
    K = np.zeros((n, n))
    diag = np.zeros(n)
    for c, p in terms:
        if p == "log":
            P = np.log(np.where(off, diff, 1.0))
            S = ((x - lo) * (np.log(x - lo) - 1) + (hi - x) * (np.log(hi - x) - 1))
        else:
            with np.errstate(divide="ignore"):
                P = np.where(off, diff, 1.0) ** p
            S = _power_domain_integral(x, p, lo, hi)
        P[~off] = 0.0
        K += c * P
        diag += c * (S - P @ lw)
    K[~off] = diag / lw
    if regular is not None:
        K = K + regular
    val = pref * float(f @ (K * np.outer(lw, lw)) @ f)
    if not math.isfinite(val) or val > 1e300 or val < -1e-12 * abs(pref):
        raise NumericalError("not in R_{s,d}: Rollnick-type integral diverges")
    return math.sqrt(max(val, 0.0))


def _real_eigs(M, vectors=False):
    if vectors:
        w, Q = np.linalg.eig(M)
    else:
        w = np.linalg.eigvals(M)
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    if np.max(np.abs(w.imag), initial=0.0) > 1e-8 * scale:
        raise NumericalError("Birman-Schwinger spectrum is not real "
                             f"(max |Im| = {np.max(np.abs(w.imag)):.3e})")
    if vectors:
        return w.real, Q.real
    return w.real


def bs_spectrum(V, s, lam, grid: Grid) -> np.ndarray:
    """Real eigenvalues of the discrete BS operator, sorted by decreasing magnitude."""
    M = assemble_bs_matrix(V, s, lam, grid)
    w = _real_eigs(M.entries)
    return w[np.argsort(-np.abs(w), kind="stable")]


@dataclass
class ResonanceReport:
    """Result of :func:`detect_resonance`.

    ``phi`` holds nodal values of the eigenfunction normalised so that
    <sign(V) phi, phi> = -1 (when that is possible) and <v, phi> >= 0.
    """

    nearest_eigenvalue: float
    phi: np.ndarray
    coupling: float
    is_resonant: bool
    is_simple: bool
    psi_asymptotic_coefficient: float
    grid_error: float = float("nan")
    tol: float = float("nan")
    second_eigenvalue: float = float("nan")
    normalised: bool = True

    def as_dict(self):
        return {
            "nearest_eigenvalue": self.nearest_eigenvalue,
            "coupling": self.coupling,
            "is_resonant": self.is_resonant,
            "is_simple": self.is_simple,
            "psi_asymptotic_coefficient": self.psi_asymptotic_coefficient,
            "grid_error": self.grid_error,
            "tol": self.tol,
            "second_eigenvalue": self.second_eigenvalue,
        }


def nearest_to_minus_one(V, s, grid, lam=0.0):
    """(mu*, weighted eigenvector, all eigenvalues) for the eigenvalue nearest -1."""
    M = assemble_bs_matrix(V, s, lam, grid)
    w, Q = _real_eigs(M.entries, vectors=True)
    k = int(np.argmin(np.abs(w + 1.0)))
    return w[k], Q[:, k], w


def detect_resonance(V: Potential, s, grid: Grid, tol=None) -> ResonanceReport:
    """Classify the eigenvalue of B0 nearest to -1.

    The grid error of that eigenvalue is estimated from one coarsening step
    (half the cells) when the potential carries a sampler; the default
    tolerance is ten times that estimate.
    """
    if tol is not None and not tol > 0:
        raise ConfigError("tol must be positive")
    d = grid.dimension
    mu, vec, w = nearest_to_minus_one(V, s, grid)
    err = float("nan")
    if getattr(V, "sampler", None) is not None:
        coarse = grid.refined(0.5)
        mu_c, _, _ = nearest_to_minus_one(V.on_grid(coarse), s, coarse)
        err = abs(mu - mu_c)
    if tol is None:
        if not math.isfinite(err):
            raise ConfigError("tol is required for potentials without a sampler")
        tol = max(10.0 * err, 1e-12)
    if not math.isfinite(err):
        err = tol / 10.0

    vals = _values(V)
    sg = np.sign(vals)
    pair = float(np.sum(sg * vec ** 2))
    normalised = pair < 0
    if normalised:
        vec = vec / math.sqrt(-pair)
    elif abs(mu + 1.0) <= tol:
        raise NumericalError("cannot normalise <phi~, phi> = -1: radicand not positive")
    vvec = grid.to_vec(np.sqrt(np.abs(vals)))
    coupling = float(vvec @ vec)
    if coupling < 0:
        vec, coupling = -vec, -coupling
    tol_c = 1e-6 * float(np.linalg.norm(vvec)) * float(np.linalg.norm(vec))
    others = np.delete(w, int(np.argmin(np.abs(w - mu))))
    second = float(others[np.argmin(np.abs(others - mu))]) if others.size else float("nan")
    # simple unless another eigenvalue is indistinguishable from mu* at tol
    is_simple = bool(others.size == 0 or abs(second - mu) > tol)
    is_res = bool(abs(mu + 1.0) <= tol and coupling > tol_c)
    params = FractionalParams(s, d)
    try:
        lam_s = lambda_s_constant(params)
    except ConfigError:
        lam_s = float("nan")
    return ResonanceReport(float(mu), grid.from_vec(vec), coupling, is_res,
                           is_simple, lam_s * coupling, err, float(tol), second,
                           normalised)


@dataclass
class ResonanceFunction:
    psi: np.ndarray
    coefficient: float
    psi_residual: np.ndarray


def resonance_function(report: ResonanceReport, V, s, grid: Grid) -> ResonanceFunction:
    """psi = G_{s,0} * (v phi) on the grid, its tail coefficient and remainder."""
    vals = _values(V)
    v = np.sqrt(np.abs(vals))
    M0 = kernel_matrix(s, 0.0, grid)
    psi = grid.from_vec(M0 @ grid.to_vec(v * report.phi))
    lam_s = lambda_s_constant(FractionalParams(s, grid.dimension))
    c = lam_s * report.coupling
    r = np.abs(grid.nodes)
    resid = psi - c * r ** (s - grid.dimension)
    return ResonanceFunction(psi, c, resid)
