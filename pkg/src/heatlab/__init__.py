"""Heat kernels, intrinsic metrics and Gaussian bound verification on weighted graphs."""

__version__ = "0.1.0"

from .graph import (Graph, GraphError, IidUniform, VertexSet, ball, build_anti_tree, build_graph,
                    build_lattice_box, graph_from_dict, load_graph)
from .heat import (HeatKernelSlice, KernelError, dirichlet_lambda, exact_integer_line_kernel,
                   heat_kernel_exhaustion, heat_kernel_finite)
from .metrics import (PseudoMetric, check_intrinsic, chemical_distance, combinatorial_metric,
                      path_degree_metric)
from .optimal import davies_metric, max_intrinsic_metric, regularity_constant
from .verify import BoundReport, PreconditionError, verify_davies, verify_universal

__all__ = [
    "__version__", "Graph", "GraphError", "IidUniform", "VertexSet", "ball", "build_anti_tree",
    "build_graph", "build_lattice_box", "graph_from_dict", "load_graph", "HeatKernelSlice",
    "KernelError", "dirichlet_lambda", "exact_integer_line_kernel", "heat_kernel_exhaustion",
    "heat_kernel_finite", "PseudoMetric", "check_intrinsic", "chemical_distance",
    "combinatorial_metric", "path_degree_metric", "davies_metric", "max_intrinsic_metric",
    "regularity_constant", "BoundReport", "PreconditionError", "verify_davies", "verify_universal",
]
