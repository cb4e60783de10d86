"""Fast invariant suites, one per module, used by the CLI ``--check`` modes.

Each suite returns a list of :class:`CheckResult`; none takes more than a
few seconds.  The full verification lives in the test suite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core_math import (FractionalParams, PointInteraction, bound_state_energy,
                        deficiency_index, theta)
from .discretization import kernel_matrix, make_grid
from .errors import FracPointError
from .green_kernel import GreenMethod, green, green_at_zero_closed_form


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str = ""


def _run(name, fn):
    try:
        ok, detail = fn()
    except FracPointError as exc:  # a failing computation is a failed check
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return CheckResult(name, bool(ok), detail)


def core_math_checks():
    def deficiency():
        cases = {(2, 1): 2, (2, 3): 1, (1.2, 1): 1, (0.4, 1): 0, (1.8, 3): 1}
        bad = {k: deficiency_index(*k) for k, v in cases.items() if deficiency_index(*k) != v}
        return not bad, f"mismatches {bad}" if bad else "5 cases"

    def poles():
        worst = 0.0
        for s, d, a in [(1.8, 3, -0.3), (2.2, 3, -2.0), (0.7, 1, -1.0),
                        (1.3, 1, 0.8), (1.0, 1, 0.3)]:
            E = bound_state_energy(PointInteraction(FractionalParams(s, d), a))
            worst = max(worst, abs(theta(s, -E, d) - a) / (1 + abs(a)))
        return worst <= 1e-12, f"max |Theta(|E|) - alpha|/(1+|alpha|) = {worst:.2e}"

    return [_run("deficiency index", deficiency), _run("pole consistency", poles)]


def green_checks():
    def closed_form():
        worst = 0.0
        for d in (1, 3):
            p = FractionalParams(2.0, d)
            for r in (0.1, 1.0, 5.0):
                a = green(p, 1.0, r).value
                b = green(p, 1.0, r, method=GreenMethod.SplitQuadrature).value
                worst = max(worst, abs(a - b) / abs(a))
        return worst <= 1e-6, f"max rel err {worst:.2e}"

    def origin():
        s, lam = 4 / 3, 0.7
        a = green(FractionalParams(s, 1), lam, 0.0, method=GreenMethod.SplitQuadrature).value
        b = green_at_zero_closed_form(s, lam)
        return abs(a - b) <= 1e-8 * abs(b), f"rel err {abs(a - b) / abs(b):.2e}"

    def scaling():
        worst = 0.0
        for s, d in [(1.8, 3), (0.75, 1)]:
            p = FractionalParams(s, d)
            lam, eps, x = 0.8, 0.3, 1.7
            a = green(p, lam * eps ** s, x).value
            b = eps ** (d - s) * green(p, lam, eps * x).value
            worst = max(worst, abs(a - b) / abs(b))
        return worst <= 1e-8, f"max rel err {worst:.2e}"

    return [_run("s=2 closed form", closed_form), _run("G(0) closed form", origin),
            _run("scaling identity", scaling)]


def discretization_checks():
    def symmetric():
        g = make_grid(3, 10.0, 40)
        M = kernel_matrix(1.8, 1.0, g)
        return np.array_equal(M, M.T), "3D kernel matrix symmetric"

    def volume():
        g = make_grid(3, 2.0, 17)
        err = abs(g.weights.sum() - 4 / 3 * math.pi * 8) / (4 / 3 * math.pi * 8)
        return err <= 1e-13, f"rel err {err:.1e}"

    return [_run("kernel symmetry", symmetric), _run("grid volume", volume)]


def point_interaction_checks():
    from .core_math import Friedrichs
    from .point_interaction import free_resolvent, point_resolvent, rank_one_gap

    def friedrichs():
        g = make_grid(1, 10.0, 30)
        p = FractionalParams(4 / 3, 1)
        a = point_resolvent(PointInteraction(p, Friedrichs), 1.0, g).matrix.entries
        b = free_resolvent(4 / 3, 1.0, 1, g).matrix.entries
        return np.array_equal(a, b), "Friedrichs equals free"

    def gap():
        g = make_grid(1, 10.0, 30)
        pi = PointInteraction(FractionalParams(4 / 3, 1), 2.0)
        diff = (point_resolvent(pi, 1.0, g).matrix.entries
                - free_resolvent(4 / 3, 1.0, 1, g).matrix.entries)
        a, b = np.linalg.norm(diff), rank_one_gap(pi, 1.0, g)
        return abs(a - b) <= 1e-12 * b, f"rel diff {abs(a - b) / b:.1e}"

    return [_run("Friedrichs limit", friedrichs), _run("rank-one gap", gap)]


def birman_schwinger_checks():
    from .birman_schwinger import Potential, bs_spectrum

    def real_spectrum():
        g = make_grid(3, 10.0, 40)
        V = Potential.from_function(lambda r: -np.exp(-r ** 2), g)
        w = bs_spectrum(V, 1.8, 0.0, g)
        return bool(np.all(w <= 1e-12)), f"largest eigenvalue {w.max():.3e}"

    return [_run("attractive spectrum non-positive", real_spectrum)]


def resonance_checks():
    from scipy.special import erf

    from .resonance_builder import BumpSpec, resonance_psi

    def erf_anchor():
        psi = resonance_psi(BumpSpec(), 2.0, 3)
        r = np.array([0.1, 1.0, 5.0])
        ref = erf(r / math.sqrt(2)) / (4 * math.pi * r)
        err = float(np.max(np.abs(psi(r) - ref) / ref))
        return err <= 1e-5, f"max rel err {err:.2e}"

    return [_run("s=2 Gaussian anchor", erf_anchor)]


def shrinking_limit_checks():
    from .shrinking_limit import konno_kuroda_matrix

    def oracle():
        rng = np.random.default_rng(7)
        n = 30
        Q = rng.standard_normal((n, n))
        A = Q @ Q.T + np.eye(n)
        V = rng.standard_normal(n)
        R = np.linalg.inv(A + np.eye(n))
        K = konno_kuroda_matrix(R, V)
        ref = np.linalg.inv(A + np.diag(V) + np.eye(n))
        err = np.linalg.norm(K - ref) / np.linalg.norm(ref)
        return err <= 1e-10, f"rel err {err:.1e}"

    return [_run("Konno-Kuroda oracle", oracle)]


SUITES = {
    "core_math": core_math_checks,
    "green_kernel": green_checks,
    "discretization": discretization_checks,
    "birman_schwinger": birman_schwinger_checks,
    "resonance_builder": resonance_checks,
    "point_interaction": point_interaction_checks,
    "shrinking_limit": shrinking_limit_checks,
}


def run_suites(names):
    out = []
    for name in names:
        for res in SUITES[name]():
            res.name = f"{name}: {res.name}"
            out.append(res)
    return out
