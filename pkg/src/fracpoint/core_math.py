"""Closed-form scalar quantities for point perturbations of (-Delta)^{s/2}.

Everything here is a pure function of its arguments.  The regime map of
``(s, d)`` pairs lives in :class:`FractionalParams`; the self-adjoint
extension parameter is carried by :class:`PointInteraction`, where the
Friedrichs extension (``alpha = infinity``) is a tagged variant rather than
a float sentinel.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Union

from .errors import ConfigError

# tolerance used to decide that s sits exactly on a regime boundary
_EDGE_TOL = 1e-12


class Regime(enum.Enum):
    ResonanceDriven = "resonance-driven"
    ResonanceIndependent = "resonance-independent"
    Transition = "transition"
    Endpoint = "endpoint"
    Unsupported = "unsupported"


def _near(a, b):
    return abs(a - b) <= _EDGE_TOL * max(1.0, abs(b))


def classify(s: float, d: int) -> Regime:
    """Regime of the pair ``(s, d)``."""
    if d not in (1, 3):
        return Regime.Unsupported
    if _near(s, d / 2 + 1):
        return Regime.Endpoint
    if _near(s, d):
        return Regime.Transition
    if d == 3 and 1.5 < s < 2.5:
        return Regime.ResonanceDriven
    if d == 1 and 0.5 < s < 1.0:
        return Regime.ResonanceDriven
    if d == 1 and 1.0 < s < 1.5:
        return Regime.ResonanceIndependent
    return Regime.Unsupported


def regime_requirement(d: int) -> str:
    """Human readable admissible interval for dimension ``d``."""
    if d == 3:
        return "3D requires s ∈ (3/2,5/2), s ≠ 5/2"
    if d == 1:
        return "1D requires s ∈ (1/2,3/2), s ≠ 3/2"
    return "dimension must be 1 or 3"


@dataclass(frozen=True)
class FractionalParams:
    """The exponent ``s`` of (-Delta)^{s/2} and the dimension ``d``."""

    s: float
    d: int

    def __post_init__(self):
        if self.d not in (1, 3):
            raise ConfigError(f"dimension must be 1 or 3, got d={self.d}")
        if not (self.s > 0 and math.isfinite(self.s)):
            raise ConfigError(f"s must be positive and finite, got s={self.s}")

    @property
    def regime(self) -> Regime:
        return classify(self.s, self.d)

    def require_supported(self, allow_transition=False):
        """Raise :class:`ConfigError` unless the pair lies in a treated regime.

        The 1D transition value ``s = 1`` is accepted only when
        ``allow_transition`` is set (it is meaningful for ``theta`` and the
        bound state, which have a logarithmic branch there).
        """
        reg = self.regime
        ok = {Regime.ResonanceDriven, Regime.ResonanceIndependent}
        if allow_transition and self.d == 1:
            ok.add(Regime.Transition)
        if reg not in ok:
            raise ConfigError(
                f"{regime_requirement(self.d)}; got s={self.s!r} ({reg.value})"
            )
        return self


class _FriedrichsType:
    """Singleton tag for the extension with alpha = infinity."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Friedrichs"

    def __reduce__(self):
        return (_FriedrichsType, ())


Friedrichs = _FriedrichsType()


@dataclass(frozen=True)
class PointInteraction:
    """A self-adjoint point perturbation k_alpha of (-Delta)^{s/2} at 0.

    ``alpha`` is a finite real for proper extensions or the
    :data:`Friedrichs` tag for the free operator.
    """

    params: FractionalParams
    alpha: Union[float, _FriedrichsType]

    def __post_init__(self):
        if self.alpha is not Friedrichs:
            a = float(self.alpha)
            if not math.isfinite(a):
                raise ConfigError("use the Friedrichs variant for alpha = infinity")
            object.__setattr__(self, "alpha", a)
        self.params.require_supported(allow_transition=True)

    @property
    def is_friedrichs(self) -> bool:
        return self.alpha is Friedrichs


def sin_pi(x: float) -> float:
    """sin(pi x) with the argument reduced to [0, pi/2] first.

    Near integer x the plain ``math.sin(math.pi * x)`` loses all relative
    accuracy; here the reduction is done on ``x`` itself, which is exact in
    floating point for the range of interest.
    """
    r = math.fmod(x, 2.0)
    if r < 0:
        r += 2.0
    sign = 1.0
    if r >= 1.0:
        r -= 1.0
        sign = -1.0
    r = min(r, 1.0 - r)
    return sign * math.sin(math.pi * r)


def riesz_constant(sigma: float, d: int) -> float:
    """Constant of the inverse Fourier transform of |p|^{-sigma} in R^d.

    (2 pi)^{-d} int e^{ipx} |p|^{-sigma} dp = riesz_constant * |x|^{sigma-d},
    analytically continued in ``sigma`` away from the Gamma poles.
    """
    return math.gamma((d - sigma) / 2) / (
        2.0 ** sigma * math.pi ** (d / 2) * math.gamma(sigma / 2)
    )


def lambda_s_constant(params: FractionalParams) -> float:
    """Coefficient of the local singularity G_{s,0}(x) = Lambda_s |x|^{s-d}.

    Valid for 0 < s < d; for s >= d there is no power-law singularity.
    """
    s, d = params.s, params.d
    if s >= d or _near(s, d):
        raise ConfigError(
            f"no power-law singularity in this regime (s={s} >= d={d})"
        )
    return riesz_constant(s, d)


def deficiency_index(s: float, d: int) -> int:
    """Deficiency index of (-Delta)^{s/2} restricted to C_c^infty(R^d \\ {0}).

    With n the index such that s lies in (d/2 + n - 1, d/2 + n] (n = 0 on
    (0, d/2]) the index is binom(d + n - 1, d).
    """
    if not s > 0 or d < 1:
        raise ConfigError("deficiency_index needs s > 0 and d >= 1")
    x = s - d / 2
    if x <= _EDGE_TOL:
        return 0
    n = math.ceil(x - _EDGE_TOL)
    return math.comb(d + n - 1, d)


def c_coefficient(s: float, d: int) -> float:
    """Low-energy coefficient c_d(s) in G_{s,lam} - G_{s,0} ~ c_d lam^{d/s-1}.

    c_3 = 1/(2 pi s sin(3 pi/s)), c_1 = 1/(s sin(pi/s)).
    """
    if d == 3:
        return 1.0 / (2 * math.pi * s * sin_pi(3.0 / s))
    if d == 1:
        return 1.0 / (s * sin_pi(1.0 / s))
    raise ConfigError("dimension must be 1 or 3")


def _theta_domain(s, d):
    if d == 3 and 1.5 < s < 2.5:
        return
    if d == 1 and 0.5 < s < 1.5:
        return
    raise ConfigError(f"{regime_requirement(d)}; got s={s!r}")


def theta(s: float, lam: float, d: int) -> float:
    """Boundary coefficient Theta(s, lam) of the point-interaction resolvent."""
    _theta_domain(s, d)
    if not lam > 0:
        raise ConfigError(f"theta needs lam > 0, got {lam!r}")
    if d == 3:
        return lam ** (3.0 / s - 1.0) * c_coefficient(s, 3)
    if _near(s, 1.0):
        return -math.log(lam) / math.pi
    return 1.0 / (lam ** (1.0 - 1.0 / s) * s * sin_pi(1.0 / s))


def bound_state_energy(pi: PointInteraction) -> Optional[float]:
    """Negative eigenvalue of k_alpha, or None when the spectrum is purely essential."""
    if pi.is_friedrichs:
        return None
    s, d, a = pi.params.s, pi.params.d, pi.alpha
    _theta_domain(s, d)
    if d == 3:
        if a >= 0:
            return None
        base = 2 * math.pi * abs(a) * s * (-sin_pi(3.0 / s))
        return -(base ** (s / (3.0 - s)))
    if _near(s, 1.0):
        return -math.exp(-math.pi * a)
    if (s - 1.0) * a <= 0:
        return None
    base = a * s * sin_pi(1.0 / s)
    return -(base ** (s / (1.0 - s)))
