"""Numerical laboratory for fractional powers of nondivergence-form elliptic
operators via the degenerate extension problem, with the quasi-metric geometry
machinery and the regularity measurement experiments built on top of it."""

__version__ = "0.1.0"

from .geometry import FractionalSetup, MAGeometry, SectionDescriptor
from .gridfn import BoxGrid, GridFunction
from .semigroup import (CoefficientField, QuadratureSpec, SemigroupStepper,
                        ds_constant, fractional_apply, fractional_inverse,
                        extension_via_semigroup)
from .extension import (ExtensionMesh, ExtensionProblem, ExtensionState,
                        reflect_even, rescale_solution, solve_extension,
                        transform_to_y, transform_to_z)
from .barriers import (BarrierCase1, BarrierCase2, MAParaboloid, MAPolynomial,
                       barrier_case2, inf_convolution, polynomial_to_MA, pucci,
                       search_case2_parameters, slide_paraboloids, touch_test)
from .regularity import (campanato_iterate, harnack_quotient, holder_seminorm,
                         schauder_decay)
from .config import ExperimentConfig, load_config
from .runner import RunManifest, run

__all__ = [
    "FractionalSetup", "MAGeometry", "SectionDescriptor",
    "BoxGrid", "GridFunction",
    "CoefficientField", "QuadratureSpec", "SemigroupStepper", "ds_constant",
    "fractional_apply", "fractional_inverse", "extension_via_semigroup",
    "ExtensionMesh", "ExtensionProblem", "ExtensionState", "reflect_even",
    "rescale_solution", "solve_extension", "transform_to_y", "transform_to_z",
    "BarrierCase1", "BarrierCase2", "MAParaboloid", "MAPolynomial",
    "inf_convolution", "polynomial_to_MA", "pucci", "slide_paraboloids",
    "touch_test",
    "campanato_iterate", "harnack_quotient", "holder_seminorm", "schauder_decay",
    "ExperimentConfig", "load_config", "RunManifest", "run",
]
