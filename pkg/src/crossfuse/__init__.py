"""Deep graph clustering with an attention-fused content / graph auto-encoder."""
from .errors import (CrossfuseError, ContractError, DegenerateClusterError, DimensionError,
                     DivergenceError, ParameterError, ParseError)
from .experiment import ExperimentConfig, RunReport, export_results, fit, train
from .graph import SparseGraph, build_graph, load_graph, normalize_filter
from .metrics import accuracy, ari, evaluate, macro_f1, nmi
from .model import ABLATIONS, ArchitectureSpec, init_params

__version__ = "0.1.0"
