"""Gradient-comparison bandwidth selection for kernel empirical risk minimisation."""

from .exceptions import *  # noqa: F401,F403
from .grids import BandwidthNet, GridFunction, GridSpec, build_net, spatial_grid
from .kernels import KernelSpec, NoiseModel, make_kernel, make_noise
from .noisy_kmeans import NoisyKMeans, NoisySample, clustering_error, select_bandwidth_kmeans
from .robust_regression import HuberLocalRegressor, RegressionSample, select_global, select_pointwise
from .selector import SelectionReport

__version__ = "0.1.0"
