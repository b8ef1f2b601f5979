"""Single-timescale actor-critic for stochastic discrete-time LQR."""

from .model import LqrModel, example_1, example_2, solve_riccati, stationary_operators
from .sampler import EnvHandle, RngStream, SampleConfig, make_env
from .trainer import TrainConfig, TrainResult, train

__all__ = [
    "LqrModel", "example_1", "example_2", "solve_riccati", "stationary_operators",
    "EnvHandle", "RngStream", "SampleConfig", "make_env",
    "TrainConfig", "TrainResult", "train",
]
