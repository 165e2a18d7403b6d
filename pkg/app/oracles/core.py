import logging
from typing import Callable, Dict, List, Optional, Sequence

import pydantic

from app.services.errors import GraphGameError, OracleFailure
from app.services.utils import discover_functions


logger = logging.getLogger(__name__)


class OracleResult(pydantic.BaseModel):
    name: str
    passed: bool
    measured: float
    expected: float
    tolerance: float
    detail: str = ""

    def describe(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        text = f"{verdict} {self.name}: measured {self.measured:.6g}, expected {self.expected:.6g} (tolerance {self.tolerance:.3g})"
        return f"{text}; {self.detail}" if self.detail else text


def discover_oracles(module_name, prefix) -> Dict[str, Callable[[], OracleResult]]:
    return discover_functions(module_name, prefix, kind="Oracle")


def get_oracles():
    return list(discover_oracles(module_name="app.oracles.handlers", prefix="oracle_").keys())


def run_oracles(names: Optional[Sequence[str]] = None) -> List[OracleResult]:
    """Runs the named oracles, all of them by default; a numerical failure inside an oracle counts as a FAIL."""
    handlers = discover_oracles(module_name="app.oracles.handlers", prefix="oracle_")
    unknown = sorted(set(names or []) - set(handlers))
    if unknown:
        raise OracleFailure(f"Unknown oracles: {', '.join(unknown)}", detail=f"known oracles: {', '.join(sorted(handlers))}")
    results = []
    for name in names or sorted(handlers):
        try:
            result = handlers[name]()
        except GraphGameError as e:
            result = OracleResult(name=name, passed=False, measured=float("nan"), expected=float("nan"), tolerance=0.0, detail=str(e))
        level = logging.INFO if result.passed else logging.ERROR
        logger.log(level, result.describe(), extra={"oracle": name, "passed": result.passed})
        results.append(result)
    return results
