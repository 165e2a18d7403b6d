from .base import env

DEFAULT_SCENARIO = env.str("GRAPHGAME_DEFAULT_SCENARIO", "example_1d")

# Concurrent learning is switched on once the history stack is rich enough
RANK_GATE_THRESHOLD = env.float("GRAPHGAME_RANK_GATE_THRESHOLD", 0.01)

# Savitzky-Golay differentiation of recorded states
SG_WINDOW = env.int("GRAPHGAME_SG_WINDOW", 9)
SG_ORDER = env.int("GRAPHGAME_SG_ORDER", 5)

# Steps between two candidates offered to a history stack
HISTORY_INTERVAL = env.int("GRAPHGAME_HISTORY_INTERVAL", 10)

DEFAULT_DECIMATE = env.int("GRAPHGAME_DECIMATE", 10)

# Simulated seconds between progress log lines
PROGRESS_EVERY = env.float("GRAPHGAME_PROGRESS_EVERY", 5.0)

# Tolerances shared by the numerical checks
RANK_TOLERANCE = env.float("GRAPHGAME_RANK_TOLERANCE", 1e-10)
SINGULARITY_TOLERANCE = env.float("GRAPHGAME_SINGULARITY_TOLERANCE", 1e-10)

# Largest |λ| dt a single RK4 step may take along the stiffest learning direction; longer steps are subdivided
RK4_STABILITY_LIMIT = env.float("GRAPHGAME_RK4_STABILITY_LIMIT", 2.5)
MAX_SUBSTEPS = env.int("GRAPHGAME_MAX_SUBSTEPS", 64)

# Residual above which a relative steady-state input is reported as unable to hold the formation
STEADY_STATE_TOLERANCE = env.float("GRAPHGAME_STEADY_STATE_TOLERANCE", 1e-6)
