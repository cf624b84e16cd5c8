"""
closedorbits: a numerical lab for a volume-preserving flow on a 5-manifold
whose orbits are all closed but have unbounded lengths.

Submodules
----------
forms       chart-level exterior calculus
thurston    the Heisenberg quotient, the flow X, beta and mu
flow        integration, period detection, orbit lengths
chains      leaf integrals, cylinder chains, fluxes, Stokes residuals
wadsley     circle-action averaging, Euler metrics, curl
hopf        the Hopf action on S^3 used as the geodesible example
properties  randomised identity checks for the exterior calculus
checks      verification suites returning CheckResult records
cli         the ``closedorbits`` command line tool
"""
from .errors import (ContractError, DomainError, IntegrationError, PeriodNotFoundError,
                     UnsupportedOperation)
from .rng import SplitMix64

__version__ = "0.1.0"

__all__ = [
    "ContractError",
    "DomainError",
    "IntegrationError",
    "PeriodNotFoundError",
    "UnsupportedOperation",
    "SplitMix64",
]
