"""Python access to the DeePC / ARX-MPC building benchmark."""

import json

from . import _core
from ._core import (
    BuildingModel,
    ConfigError,
    ControllerError,
    DataError,
    DimensionError,
    NumericalError,
    build_hankel,
    check_persistent_excitation,
    compute_kpis,
    kkt_residuals,
    pinv,
    solve_qp,
    step_plant,
)

__all__ = [
    "BuildingModel",
    "ConfigError",
    "ControllerError",
    "DataError",
    "DimensionError",
    "NumericalError",
    "build_hankel",
    "check_persistent_excitation",
    "compare",
    "compute_kpis",
    "default_config",
    "kkt_residuals",
    "pinv",
    "simulate",
    "solve_qp",
    "step_plant",
]


def default_config():
    """The effective default experiment config as a dict."""
    return json.loads(_core.default_config_json())


def simulate(controller, config=None):
    """Run one controller in closed loop. Returns a dict of numpy arrays and KPIs."""
    return _core.simulate(controller, json.dumps(config or {}))


def compare(config=None):
    """Run every configured controller on one scenario; one dict per controller."""
    return _core.compare(json.dumps(config or {}))
