"""Bayes estimation of unimodal densities through pairs of S-paths."""

from .base_measure import BaseMeasure, ParetoMixture
from .paths import (
    Partition,
    PathError,
    SPath,
    count_corresponding_partitions,
    count_partitions,
    count_paths,
    enumerate_partitions,
    enumerate_paths,
    path_of_partition,
    table1,
    validate_path,
)
from .posterior import (
    DensityGrid,
    a_f,
    center,
    exact_density_given_theta,
    exact_density_unknown_theta,
    exact_joint,
    exact_theta_posterior,
)
from .priors import NormalDensity, PointMassPrior, UniformPrior
from .samplers import PathTarget, naive_sis_draw, path_expectation, run_sis, sip_draw, sis_estimates, sis_full_draw
from .species import PoissonDirichlet, SpeciesModel

__version__ = "0.1.0"
