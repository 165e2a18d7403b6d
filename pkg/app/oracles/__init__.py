from .core import OracleResult, discover_oracles, get_oracles, run_oracles
