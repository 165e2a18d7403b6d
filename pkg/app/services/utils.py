import copy
import importlib
import inspect
import re
from pathlib import Path
from typing import Any, Callable, Dict, List, Union

from app.services.errors import ConfigurationNotFound, ConfigurationValidationError


_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_INTEGER = re.compile(r"^[+-]?\d+$")
# Sections whose numeric path segments are agent numbers
INTEGER_KEYED_SECTIONS = ("agent",)


def parse_scalar(text: str) -> Any:
    text = text.strip()
    lowered = text.lower()
    if lowered in ("true", "yes", "on"):
        return True
    if lowered in ("false", "no", "off"):
        return False
    if lowered in ("none", "null"):
        return None
    if _INTEGER.match(text):
        return int(text)
    if _NUMBER.match(text):
        return float(text)
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    return text


def parse_value(text: str) -> Union[Any, List[Any]]:
    """Numbers, booleans, ``[a, b]`` or ``a, b`` lists, or plain strings."""
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        return [parse_scalar(item) for item in inner.split(",")] if inner else []
    if "," in text:
        return [parse_scalar(item) for item in text.split(",")]
    return parse_scalar(text)


def parse_config_text(text: str) -> Dict[str, Any]:
    """Turns flat ``dotted.key = value`` lines into a nested dict.

    Blank lines and ``#`` comments are skipped; numeric segments under ``agent`` become int keys.
    """
    result: Dict[str, Any] = {}
    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        key, separator, value = line.partition("=")
        key = key.strip()
        if not separator or not key:
            raise ConfigurationValidationError(f"Line {number} is not a 'key = value' pair", detail=raw_line.strip())
        path = key.split(".")
        if any(not segment for segment in path):
            raise ConfigurationValidationError(f"Line {number} has an empty key segment", detail=key)
        node = result
        for depth, segment in enumerate(path[:-1]):
            if depth == 1 and path[0] in INTEGER_KEYED_SECTIONS and _INTEGER.match(segment):
                segment = int(segment)
            child = node.setdefault(segment, {})
            if not isinstance(child, dict):
                raise ConfigurationValidationError(f"Line {number} nests under the value key '{segment}'", detail=key)
            node = child
        leaf = path[-1]
        if len(path) == 2 and path[0] in INTEGER_KEYED_SECTIONS and _INTEGER.match(leaf):
            leaf = int(leaf)
        if isinstance(node.get(leaf), dict):
            raise ConfigurationValidationError(f"Line {number} overwrites the section '{key}'")
        node[leaf] = parse_value(value)
    return result


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigurationNotFound(f"Cannot read config file '{path}'", detail=str(e))
    return parse_config_text(text)


def deep_merge(base: Dict[Any, Any], override: Dict[Any, Any]) -> Dict[Any, Any]:
    """Copy of ``base`` with ``override`` merged in, section by section."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def discover_functions(module_name: str, prefix: str, kind: str = "Handler") -> Dict[str, Callable]:
    """Parameterless functions of a module whose names start with ``prefix``, keyed by the rest of the name."""
    handlers = {}
    module = importlib.import_module(module_name)
    for name, func in inspect.getmembers(module):
        if name.startswith(prefix) and inspect.isfunction(func):
            if inspect.signature(func).parameters:
                raise ValueError(f"{kind} '{name[len(prefix):]}' must not take parameters.")
            handlers[name[len(prefix):]] = func
    return handlers
