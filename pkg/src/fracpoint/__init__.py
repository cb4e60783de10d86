"""Point interactions of the fractional Laplacian as limits of shrinking potentials.

Modules:

* :mod:`~fracpoint.core_math` - regime map, Theta, bound states, deficiency index
* :mod:`~fracpoint.green_kernel` - the Green function G_{s,lam}
* :mod:`~fracpoint.discretization` - grids and weighted kernel matrices
* :mod:`~fracpoint.birman_schwinger` - BS spectra and resonance detection
* :mod:`~fracpoint.resonance_builder` - constructive resonant potentials
* :mod:`~fracpoint.point_interaction` - free and point-interaction resolvents
* :mod:`~fracpoint.shrinking_limit` - Konno-Kuroda resolvents and eps sweeps
"""
__version__ = "0.1.0"

from .core_math import (FractionalParams, Friedrichs, PointInteraction, Regime,
                        bound_state_energy, classify, deficiency_index, theta)
from .errors import ConfigError, FracPointError, NumericalError

__all__ = [
    "__version__", "FractionalParams", "Friedrichs", "PointInteraction", "Regime",
    "bound_state_energy", "classify", "deficiency_index", "theta",
    "ConfigError", "FracPointError", "NumericalError",
]
