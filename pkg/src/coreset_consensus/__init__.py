"""Distributed minimum enclosing ball by core-set consensus.

Nodes of a time-varying directed network each hold a few points, exchange
small candidate core-sets, and agree on one core-set whose ball covers all
points within ``(1 + epsilon)`` times the optimal radius. 2-norm SVM, SVDD
and one-class L2 SVM training reduce to the same problem.
"""

__version__ = "0.1.0"

from .consensus import (Message, NodeState, Trace, VerificationReport, detect_consensus,
                        fixed_point_check, local_routine, round_robin, run_consensus,
                        verify_epsilon)
from .coreset import CoreSet, best_removal, coreset_refine, coreset_size, farthest_point
from .estimators import CoreSetMEB, CoreSetSVC, CoreSetSVDD, OneClassL2SVM
from .exceptions import (InvalidProblemError, InvalidSolutionError, SolverError,
                         UnsupportedSizeError)
from .meb import Ball, BallCache, SolverConfig, meb_oracle, solve_meb
from .netsim import (AlwaysOn, BernoulliActive, Digraph, ErdosRenyi, FixedRing,
                     PeriodicSequence, is_strongly_connected, load_schedule, sample_graph,
                     union_graph)
from .reductions import (Classifier, SvmProblem, extract_classifier, oneclass_to_meb, predict,
                         svdd_to_meb, svm2norm_to_meb)
from .space import Kernel, PointSpace, load_csv

__all__ = [
    "AlwaysOn", "Ball", "BallCache", "BernoulliActive", "Classifier", "CoreSet", "CoreSetMEB",
    "CoreSetSVC", "CoreSetSVDD", "Digraph", "ErdosRenyi", "FixedRing", "InvalidProblemError",
    "InvalidSolutionError", "Kernel", "Message", "NodeState", "OneClassL2SVM",
    "PeriodicSequence", "PointSpace", "SolverConfig", "SolverError", "SvmProblem", "Trace",
    "UnsupportedSizeError", "VerificationReport", "best_removal", "coreset_refine",
    "coreset_size", "detect_consensus", "extract_classifier", "farthest_point",
    "fixed_point_check", "is_strongly_connected", "load_csv", "load_schedule",
    "local_routine", "meb_oracle", "oneclass_to_meb", "predict", "round_robin",
    "run_consensus", "sample_graph", "solve_meb", "svdd_to_meb", "svm2norm_to_meb",
    "union_graph", "verify_epsilon",
]
