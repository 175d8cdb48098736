"""Simulation laboratory for diffusions whose diffusivity changes at each visit to the origin."""

from .rng import PRNG_ALGORITHM, RngStream, as_generator

__version__ = "0.1.0"

__all__ = ["PRNG_ALGORITHM", "RngStream", "as_generator", "__version__"]
