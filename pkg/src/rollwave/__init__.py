"""Roll waves of the viscous Saint-Venant equations: profiles, modulation
systems, Evans/Bloch spectra and modulated-wave simulations."""

__version__ = "0.1.0"

from .core import PhysicalParams, WaveKey  # noqa: E402
from .errors import ConfigError, NumericalError, RegimeError, RollwaveError  # noqa: E402

__all__ = ["PhysicalParams", "WaveKey", "RollwaveError", "RegimeError", "NumericalError",
           "ConfigError", "__version__"]
