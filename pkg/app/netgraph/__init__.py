from .core import (
    LEADER,
    DirectedNetwork,
    SubgraphIndex,
    laplacian,
    formation_matrix,
    extended_neighborhood,
    subgraph_index,
    verify_spanning_tree,
    formation_matrix_nonsingular,
)
