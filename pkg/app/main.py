import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import click

import app.settings as settings
from app.oracles import get_oracles, run_oracles
from app.services.activity_logger import activity_logger, log_activity
from app.services.errors import GraphGameError
from app.services.reporting import PLOT_FILE, REPORT_FILE, TRACE_FILE, RunReport, emit_plot_script, write_trace
from app.sim import Simulation, SimConfig, build_context, get_scenarios, load_config


logger = logging.getLogger(__name__)


def _overrides(t_final, dt, decimate, seed) -> dict:
    return {"t_final": t_final, "dt": dt, "decimate": decimate, "seed": seed}


def _load(config_path, scenario, t_final=None, dt=None, decimate=None, seed=None) -> SimConfig:
    return load_config(path=config_path, scenario=scenario, overrides=_overrides(t_final, dt, decimate, seed))


@activity_logger()
def command_run(config: SimConfig, out_dir: Path, dump_stacks: bool = False) -> int:
    simulation = Simulation(config)
    trace = simulation.run()
    write_trace(trace, out_dir / TRACE_FILE)
    emit_plot_script(trace, out_dir / PLOT_FILE)
    report = RunReport.from_trace(trace, scenario=config.scenario)
    report.write(out_dir / REPORT_FILE)
    if dump_stacks:
        for i, runtime in simulation.runtimes.items():
            runtime.stack.to_csv(out_dir / f"stack_{i}.csv")
    log_activity(
        activity_id="run",
        title="Run summary",
        level="INFO" if trace.aborted is None else "ERROR",
        config_data=config.summary(),
        data={"rows": len(trace), "wall_clock": trace.wall_clock, "aborted": trace.aborted},
    )
    return 0 if trace.aborted is None else 2


@activity_logger(on_start=False)
def command_validate(config: SimConfig) -> int:
    context = build_context(config)
    click.echo(
        f"Config valid: {context.net.n_agents} agents, scenario '{config.scenario}', "
        f"{int(round(config.t_final / config.dt))} steps"
    )
    return 0


@activity_logger()
def command_oracle(names: Sequence[str] = ()) -> int:
    results = run_oracles(list(names) or None)
    for result in results:
        click.echo(result.describe())
    return 0 if all(result.passed for result in results) else 2


scenario_option = click.option(
    "--scenario", default=None, type=click.Choice(get_scenarios()), help="Scenario whose defaults the config extends"
)
config_option = click.option(
    "--config", "config_path", default=None, type=click.Path(dir_okay=False), help="Flat key = value config file"
)


@click.group()
def cli():
    """Model-based actor-critic learning for leader-follower formation games."""


@cli.command(name="run")
@config_option
@scenario_option
@click.option("--out-dir", default=settings.GRAPHGAME_OUT_DIR, type=click.Path(file_okay=False), show_default=True)
@click.option("--t-final", type=float, default=None, help="Horizon override (s)")
@click.option("--dt", type=float, default=None, help="Step size override (s)")
@click.option("--decimate", type=int, default=None, help="Steps per logged row")
@click.option("--seed", type=int, default=None, help="Seed for random extrapolation grids")
@click.option("--dump-stacks", is_flag=True, default=False, help="Write every history stack as stack_<i>.csv")
def run_simulation(config_path, scenario, out_dir, t_final, dt, decimate, seed, dump_stacks):
    """Simulate the network and write trace.csv, report.txt and plots.gp."""
    config = _load(config_path, scenario, t_final, dt, decimate, seed)
    return command_run(config=config, out_dir=Path(out_dir), dump_stacks=dump_stacks)


@cli.command(name="validate")
@config_option
@scenario_option
@click.option("--t-final", type=float, default=None)
@click.option("--dt", type=float, default=None)
@click.option("--decimate", type=int, default=None)
@click.option("--seed", type=int, default=None)
def validate(config_path, scenario, t_final, dt, decimate, seed):
    """Check the config and the topology without simulating."""
    config = _load(config_path, scenario, t_final, dt, decimate, seed)
    return command_validate(config=config)


@cli.command(name="oracle")
@click.argument("names", nargs=-1, type=click.Choice(get_oracles()))
def oracle(names):
    """Run the reference checks and print PASS or FAIL for each."""
    return command_oracle(names=names)


def main(args: Optional[Sequence[str]] = None) -> int:
    """Runs the command line and maps failures to exit codes: 1 for configuration, 2 for numerical."""
    try:
        result = cli.main(args=args, prog_name="graphgame", standalone_mode=False)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.exceptions.Abort:
        click.echo("Aborted.", err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except GraphGameError as e:
        click.echo(f"Error: {e}", err=True)
        return e.exit_code
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    sys.exit(main())
