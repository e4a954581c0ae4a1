"""Joint selection, labeling and partitioning of body-part candidates into
person poses by branch-and-cut over a 0/1 integer program."""
from .model import (
    DetectionSet, Detection, GroundTruthScene, Mode, PartClass, PoseResult, ProblemInstance,
    SolutionTriple, derive_z,
)
from .objective import build_instance, evaluate, pairwise_cost, unary_cost
from .solver import SolverConfig, SolverReport, Status, brute_force, extract_poses, solve

__version__ = "0.1.0"

__all__ = [
    "Detection", "DetectionSet", "GroundTruthScene", "Mode", "PartClass", "PoseResult", "ProblemInstance",
    "SolutionTriple", "SolverConfig", "SolverReport", "Status", "brute_force", "build_instance", "derive_z",
    "evaluate", "extract_poses", "pairwise_cost", "solve", "unary_cost",
]
