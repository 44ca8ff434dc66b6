"""Null problem: zero rewards, so every value and coefficient is zero."""
from dataclasses import dataclass, replace

import numpy as np

from ..model import (MAXIMIZE, ControlSet, LinearGaussianStep, SeparableReward, StateDomain,
                     TimeGrid, linear_gaussian_model)


@dataclass(frozen=True)
class ZeroSpec:
    N: int = 5
    domain: tuple = (-1.0, 1.0)
    control: tuple = (-1.0, 1.0)
    noise_sd: float = 0.1

    def validate(self):
        return [] if self.N >= 1 else ["N must be >= 1"]


def build_zero(spec=None):
    spec = spec or ZeroSpec()
    return linear_gaussian_model(
        "zero",
        TimeGrid(spec.N),
        StateDomain([spec.domain[0]], [spec.domain[1]]),
        ControlSet([spec.control[0]], [spec.control[1]]),
        LinearGaussianStep.scalar(1.0, 1.0, 0.0, spec.noise_sd),
        SeparableReward(lambda n, x: np.zeros(np.shape(x)[:-1])),
        lambda x: np.zeros(np.shape(x)[:-1]),
        (0.0, 0.0),
        sense=MAXIMIZE,
        params={"spec": spec.__dict__},
    )


def with_overrides(spec, overrides):
    return replace(spec, **{k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()})
