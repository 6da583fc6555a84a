"""Weak geodesics on prox-regular subsets of model Riemannian manifolds."""

from .certify import (CertificateReport, CertifyTolerances, certify_closed_weak_geodesic,
                      certify_weak_geodesic, check_extrinsic, check_isometry_invariance,
                      check_normal_sum, probe_local_minimality)
from .curves import (DiscreteCurve, energy, length, local_perturbation,
                     reparametrize_constant_speed, seed_curve, speed_profile, sup_distance,
                     transported_gap)
from .manifolds import (UNBOUNDED, AmbientSphere, Euclidean, GeometryError, HalfPlane, Sphere2,
                        comparison_factor, covariant_accel_fd)
from .proxsets import (ConeRep, EuclideanAnnulus, EuclideanBall, EuclideanHalfSpace,
                       HyperbolicStrip, SphericalCapGe, SphericalCapLe, certified_phi,
                       cone_distance, cone_project, phi_estimate)
from .scene import Scene, parse_scene
from .solver import SolveResult, SolverOptions, residual, solve_closed, solve_endpoint

__version__ = "0.1.0"

__all__ = [
    "AmbientSphere",
    "CertificateReport",
    "certified_phi",
    "certify_closed_weak_geodesic",
    "certify_weak_geodesic",
    "CertifyTolerances",
    "check_extrinsic",
    "check_isometry_invariance",
    "check_normal_sum",
    "comparison_factor",
    "cone_distance",
    "cone_project",
    "ConeRep",
    "covariant_accel_fd",
    "DiscreteCurve",
    "energy",
    "Euclidean",
    "EuclideanAnnulus",
    "EuclideanBall",
    "EuclideanHalfSpace",
    "GeometryError",
    "HalfPlane",
    "HyperbolicStrip",
    "length",
    "local_perturbation",
    "parse_scene",
    "phi_estimate",
    "probe_local_minimality",
    "reparametrize_constant_speed",
    "residual",
    "Scene",
    "seed_curve",
    "solve_closed",
    "solve_endpoint",
    "SolveResult",
    "SolverOptions",
    "speed_profile",
    "Sphere2",
    "SphericalCapGe",
    "SphericalCapLe",
    "sup_distance",
    "transported_gap",
    "UNBOUNDED",
]
