"""Numerical toolkit for a mass-like invariant of asymptotically hyperbolic metrics with horospherical boundary.

Modules:

``halfspace``      exact geometry of the upper half-space model
``perturbations``  perturbation families ``g = b + e`` with analytic jets, decay audits
``curvature``      curvature of ``g``, second fundamental form and mean curvature of ``x^n = 1``
``killing``        conformal Killing fields and static potentials
``regions``        truncation regions and quadrature over them
``mass``           the mass integrand, facet fluxes and the ``eps -> 0`` limit
``theorem``        divergence identities, small-terms lemma, cutoff metric, evaluation by ``G`` and ``W``
``config``/``runner``/``cli``  experiment plumbing
"""

__version__ = "0.1.0"

from .halfspace import DomainError, christoffel_b, distance_r, metric_b  # noqa: E402
from .killing import potential, vector_field  # noqa: E402
from .mass import mass, mass_at  # noqa: E402
from .perturbations import BumpFamily, GaugeFamily, TailFamily, ZeroFamily, evaluate_jet  # noqa: E402
from .quadrature import QuadratureSpec  # noqa: E402

__all__ = [
    "__version__",
    "DomainError",
    "metric_b",
    "christoffel_b",
    "distance_r",
    "potential",
    "vector_field",
    "mass",
    "mass_at",
    "BumpFamily",
    "GaugeFamily",
    "TailFamily",
    "ZeroFamily",
    "evaluate_jet",
    "QuadratureSpec",
]
