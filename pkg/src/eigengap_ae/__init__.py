"""Amplitude estimation from Gaussian-filtered Grover iteration counts."""
from .gaussian_filters import Kind, PeriodicGaussian, TruncatedGaussianSampler, Variant, build_sampler
from .signal_oracle import AmplitudeOracle, Basis, MeasurementRecord, Protocol, RecordBatch, batch_measure
from .estimators import EstimateResult, EstimatorConfig, estimate, two_level_grid_search

__version__ = "0.1.0"
