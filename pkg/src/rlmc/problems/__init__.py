"""Built-in problems, registered by name."""
from dataclasses import dataclass
from typing import Callable

from ..exceptions import ConfigurationError
from . import doorways, lq, small_dp, two_period, zero


@dataclass(frozen=True)
class ProblemEntry:
    spec_cls: type
    build: Callable
    overrides: Callable


PROBLEMS = {
    "lq1": ProblemEntry(lq.LqSpec, lq.build_lq, lq.with_overrides),
    "doorways": ProblemEntry(doorways.DoorwaysSpec, doorways.build_doorways, doorways.with_overrides),
    "two_period": ProblemEntry(two_period.TwoPeriodSpec, two_period.build_two_period, two_period.with_overrides),
    "small_dp": ProblemEntry(small_dp.SmallDpSpec, small_dp.build_small_dp, small_dp.with_overrides),
    "zero": ProblemEntry(zero.ZeroSpec, zero.build_zero, zero.with_overrides),
}


def resolve_spec(name, overrides=None):
    """Default spec of problem ``name`` with ``overrides`` applied and validated."""
    if name not in PROBLEMS:
        raise ConfigurationError(f"unknown problem {name!r}", errors=[f"problem.name: choose from {sorted(PROBLEMS)}"])
    entry = PROBLEMS[name]
    spec = entry.spec_cls()
    if overrides:
        unknown = sorted(set(overrides) - set(spec.__dataclass_fields__))
        if unknown:
            raise ConfigurationError("unknown problem parameters",
                                     errors=[f"problem.overrides.{k}: not a parameter of {name}" for k in unknown])
        spec = entry.overrides(spec, overrides)
    errors = spec.validate()
    if errors:
        raise ConfigurationError(f"invalid {name} parameters", errors=[f"problem.overrides: {e}" for e in errors])
    return spec


def build_problem(name, overrides=None):
    spec = resolve_spec(name, overrides)
    return PROBLEMS[name].build(spec), spec
