"""Stochastic-update training of neural networks on simulated memristive crossbars."""

from .config import ExperimentConfig, desk_profile, full_profile, load_config
from .crossbar import CrossbarLayer, SynapsePair, WeightInit, init_layer
from .data import Dataset, NoiseSpec, add_gaussian_noise, load_idx, load_mnist, mean_normalize
from .device import DeviceParams, DeviceState, derive_geometry, program, reset
from .harness import MetricsRecord, evaluate, noise_inference_study, sweep_sigma, train
from .network import FloatNetwork, StochasticNetwork, Topology
from .stochastic import (
    BernoulliStream,
    StreamRng,
    and_multiply,
    coincidence_count,
    decode,
    encode,
)

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig",
    "desk_profile",
    "full_profile",
    "load_config",
    "CrossbarLayer",
    "SynapsePair",
    "WeightInit",
    "init_layer",
    "Dataset",
    "NoiseSpec",
    "add_gaussian_noise",
    "load_idx",
    "load_mnist",
    "mean_normalize",
    "DeviceParams",
    "DeviceState",
    "derive_geometry",
    "program",
    "reset",
    "MetricsRecord",
    "evaluate",
    "noise_inference_study",
    "sweep_sigma",
    "train",
    "FloatNetwork",
    "StochasticNetwork",
    "Topology",
    "BernoulliStream",
    "StreamRng",
    "and_multiply",
    "coincidence_count",
    "decode",
    "encode",
]
