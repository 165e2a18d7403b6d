import logging
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Union

import pydantic

from app import settings
from app.services.errors import ConfigurationValidationError, ScenarioNotFound
from app.services.utils import deep_merge, discover_functions, load_config_file
from .configurations import SimConfig


logger = logging.getLogger(__name__)


def discover_scenarios(module_name, prefix) -> Dict[str, Callable[[], dict]]:
    return discover_functions(module_name, prefix, kind="Scenario")


def get_scenarios():
    return list(discover_scenarios(module_name="app.sim.scenarios", prefix="scenario_").keys())


def scenario_defaults(name: str) -> dict:
    scenarios = discover_scenarios(module_name="app.sim.scenarios", prefix="scenario_")
    try:
        return scenarios[name]()
    except KeyError:
        raise ScenarioNotFound(f"Unknown scenario '{name}'", detail=f"known scenarios: {', '.join(sorted(scenarios))}")


def validate_config(data: Dict[str, Any]) -> SimConfig:
    try:
        return SimConfig.parse_obj(data)
    except pydantic.ValidationError as e:
        raise ConfigurationValidationError("Invalid simulation config", detail=_describe(e))


def _describe(error: pydantic.ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(part) for part in item['loc'])}: {item['msg']}" for item in error.errors()
    )


def load_config(
        path: Optional[Union[str, Path]] = None,
        scenario: Optional[str] = None,
        overrides: Optional[Dict[str, Any]] = None,
) -> SimConfig:
    """Scenario defaults, then the config file, then command-line overrides, validated once at the end.

    The scenario is ``scenario`` if given, else the file's ``scenario`` key, else the default scenario.
    """
    file_data = load_config_file(path) if path is not None else {}
    name = scenario or file_data.get("scenario") or settings.DEFAULT_SCENARIO
    data = deep_merge(scenario_defaults(name), file_data)
    data["scenario"] = name
    n_agents = file_data.get("topology", {}).get("n_agents")
    if isinstance(n_agents, int):
        # A file that resizes the network drops the scenario's surplus agents
        data["agent"] = {i: agent for i, agent in data.get("agent", {}).items() if i <= n_agents}
    data = deep_merge(data, {key: value for key, value in (overrides or {}).items() if value is not None})
    config = validate_config(data)
    logger.debug(f"Loaded config for scenario '{name}'", extra={"config_data": config.summary()})
    return config
