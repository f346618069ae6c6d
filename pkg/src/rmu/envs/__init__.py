from rmu.envs.kitchen import SHRUNKEN_LAYOUT, KitchenLayout, kitchen_env
from rmu.envs.mining import mining_env
from rmu.envs.models import (
    LabelledModel, TabularMdp, TabularPomdp, Transition, enumerate_transitions,
)
from rmu.envs.session import OracleInfo, UrmSession, session_reset, session_step
from rmu.envs.traffic import traffic_env

ENVIRONMENTS = {
    "mining": mining_env,
    "traffic": traffic_env,
    "kitchen": kitchen_env,
}


def make_env(name: str, **params) -> LabelledModel:
    try:
        ctor = ENVIRONMENTS[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None
    return ctor(**params)


__all__ = [
    "ENVIRONMENTS", "KitchenLayout", "LabelledModel", "OracleInfo", "SHRUNKEN_LAYOUT",
    "TabularMdp", "TabularPomdp", "Transition", "UrmSession", "enumerate_transitions",
    "kitchen_env", "make_env", "mining_env", "session_reset", "session_step", "traffic_env",
]
