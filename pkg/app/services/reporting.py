import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from app.services.errors import TraceWriteError
from app.sim.trace import TraceLog


logger = logging.getLogger(__name__)

TRACE_FILE = "trace.csv"
REPORT_FILE = "report.txt"
PLOT_FILE = "plots.gp"


def format_value(value: float) -> str:
    return f"{value:.9g}"


def _write_text(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as e:
        raise TraceWriteError(f"Cannot write '{path}'", detail=str(e))


def write_trace(log: TraceLog, path: Union[str, Path]) -> Path:
    """CSV with the log's header and one line per logged row, values at 9 significant digits."""
    path = Path(path)
    lines = [",".join(log.columns)]
    lines += [",".join(format_value(value) for value in row) for row in log.rows]
    _write_text(path, "\n".join(lines) + "\n")
    logger.info(f"Trace written to {path}", extra={"rows": len(log), "columns": len(log.columns)})
    return path


def _desired_block(log: TraceLog) -> List[str]:
    lines = ["$desired << EOD"]
    for t, leader in zip(log.times, log.leader):
        values = [t]
        for i in log.agents:
            values += list(log.offsets[i] + leader)
        lines.append(" ".join(format_value(v) for v in values))
    lines.append("EOD")
    return lines


def _series(data_file: str, log: TraceLog, names: List[str], style: str = "lines") -> List[str]:
    return [
        f"'{data_file}' skip 1 using 1:{log.columns.index(name) + 1} with {style} title '{name}'"
        for name in names
    ]


def _figure(output: str, title: str, ylabel: str, series: List[str]) -> List[str]:
    return [
        "",
        f"set output '{output}'",
        f"set title '{title}'",
        f"set ylabel '{ylabel}'",
        "plot " + ", \\\n     ".join(series),
    ]


def emit_plot_script(log: TraceLog, path: Union[str, Path], data_file: str = TRACE_FILE) -> Path:
    """Gnuplot script with four figures: states against their desired values, errors, u and μ,
    and critic/actor weights with the drift estimates next to dashed true parameter values.

    An empty log yields the preamble only.
    """
    path = Path(path)
    lines = [
        "# Rendered with: gnuplot plots.gp",
        "set datafile separator ','",
        "set terminal pngcairo size 1000,700",
        "set xlabel 't (s)'",
        "set key outside right",
    ]
    if len(log):
        state_names = log.matching("x_")
        lines += [""] + _desired_block(log)
        desired = [
            f"$desired using 1:{k + 2} with lines dashtype 2 title '{name} desired'"
            for k, name in enumerate(state_names)
        ]
        lines += _figure("states.png", "Agent states and desired formation", "x", _series(data_file, log, state_names) + desired)
        lines += _figure("errors.png", "Neighbourhood tracking errors", "e", _series(data_file, log, log.matching("e_")))
        lines += _figure(
            "controls.png", "Control inputs and relative control errors", "u, mu",
            _series(data_file, log, log.matching("u_") + log.matching("mu_")),
        )
        references = []
        for i in log.agents:
            for k, value in enumerate(np.ravel(log.true_theta.get(i, [])), start=1):
                references.append(f"{format_value(value)} with lines dashtype 2 title 'theta_{i}_{k} true'")
        weight_names = log.matching("Wc_") + log.matching("Wa_") + log.matching("theta_")
        lines += _figure("weights.png", "Value function weights and drift parameters", "weights", _series(data_file, log, weight_names) + references)
    _write_text(path, "\n".join(lines) + "\n")
    return path


@dataclass
class RunReport:
    """Summary metrics of one run."""
    final_errors: Dict[int, np.ndarray] = field(default_factory=dict)
    tail_max_errors: Dict[int, float] = field(default_factory=dict)
    theta_final: Dict[int, np.ndarray] = field(default_factory=dict)
    grid_rank: Dict[int, float] = field(default_factory=dict)
    stack_rank: Dict[int, float] = field(default_factory=dict)
    bounds: Dict[int, Dict[str, Optional[float]]] = field(default_factory=dict)
    wall_clock: float = 0.0
    aborted: Optional[str] = None
    scenario: Optional[str] = None

    @classmethod
    def from_trace(cls, log: TraceLog, scenario: str = None) -> "RunReport":
        report = cls(
            grid_rank=dict(log.grid_rank),
            stack_rank=dict(log.stack_rank),
            bounds=dict(log.bounds),
            wall_clock=log.wall_clock,
            aborted=log.aborted,
            scenario=scenario,
        )
        if not len(log):
            return report
        times = log.times
        # Last quarter of the logged horizon
        tail = times >= times[0] + 0.75 * (times[-1] - times[0])
        table = log.table
        for i in log.agents:
            error_columns = [log.columns.index(name) for name in log.matching(f"e_{i}") if _owned(name, "e", i)]
            theta_columns = [log.columns.index(name) for name in log.matching(f"theta_{i}_")]
            report.final_errors[i] = table[-1, error_columns]
            report.tail_max_errors[i] = float(np.max(np.abs(table[tail][:, error_columns])))
            report.theta_final[i] = table[-1, theta_columns]
        return report

    @property
    def finite(self) -> bool:
        values = [*self.final_errors.values(), *self.theta_final.values(), list(self.tail_max_errors.values())]
        return all(np.all(np.isfinite(v)) for v in values)

    def lines(self) -> List[str]:
        status = "completed" if self.aborted is None else f"aborted: {self.aborted}"
        lines = [f"scenario = {self.scenario}", f"status = {status}", f"wall_clock_s = {self.wall_clock:.3f}"]
        for i in sorted(set(self.grid_rank) | set(self.final_errors)):
            prefix = f"agent.{i}"
            if i in self.final_errors:
                lines.append(f"{prefix}.final_error = {_join(self.final_errors[i])}")
                lines.append(f"{prefix}.max_error_last_quarter = {format_value(self.tail_max_errors[i])}")
                lines.append(f"{prefix}.theta_final = {_join(self.theta_final[i])}")
            lines.append(f"{prefix}.grid_rank = {format_value(self.grid_rank.get(i, 0.0))}")
            lines.append(f"{prefix}.stack_rank = {format_value(self.stack_rank.get(i, 0.0))}")
            for name, value in self.bounds.get(i, {}).items():
                if value is not None:
                    lines.append(f"{prefix}.{name} = {format_value(value)}")
        return lines

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        _write_text(path, "\n".join(self.lines()) + "\n")
        return path


def _owned(name: str, prefix: str, agent: int) -> bool:
    """True for ``e_3`` and ``e_3_2`` but not ``e_31``."""
    parts = name.split("_")
    return parts[0] == prefix and parts[1] == str(agent)


def _join(values) -> str:
    return ", ".join(format_value(v) for v in np.ravel(values))
