from .basis import DriftBasis
from .core import (
    DriftEstimate,
    HistoryStack,
    StackEntry,
    StateObserver,
    cl_update_flow,
    observer_flow,
    stack_contraction,
    stack_rank_metric,
    try_insert_svmax,
)
from .filters import DerivativeWindow, sg_derivative
