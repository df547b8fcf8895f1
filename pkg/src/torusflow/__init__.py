"""Supersizing Ricci flows on the flat square torus."""

from .config import ExperimentConfig, parse_config, serialize_config
from .diagnostics import fit_beta, fit_c0, gauss_curvature, record
from .errors import (
    TorusFlowError, InvalidField, GridMismatch, NonPositiveField, EmptyInput,
    PointSetMismatch, InvalidOrder, ResolutionTooCoarse, GridAlignment, StepRejected,
    StiffnessFailure, InsufficientData, ConfigSyntax, ConfigInvalid, SnapshotCorrupt,
    IoError,
)
from .experiment import ExperimentReport, run_experiment, write_report
from .fields import GridSpec, ScalarField, integrate, laplacian, norms
from .flow import FlowState, SchemeConfig, evolve, init_state
from .metric import DistanceMatrix, StencilSpec, TorusPoint, conformal_distance_matrix, flat_distance
from .plots import emit_plots
from .skeleton import Skeleton, build_initial_factor, build_skeleton, calibrate_width, distance_to_skeleton
from .snapshot import read_snapshot, read_snapshot_header, write_snapshot

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig",
    "parse_config",
    "serialize_config",
    "fit_beta",
    "fit_c0",
    "gauss_curvature",
    "record",
    "TorusFlowError",
    "InvalidField",
    "GridMismatch",
    "NonPositiveField",
    "EmptyInput",
    "PointSetMismatch",
    "InvalidOrder",
    "ResolutionTooCoarse",
    "GridAlignment",
    "StepRejected",
    "StiffnessFailure",
    "InsufficientData",
    "ConfigSyntax",
    "ConfigInvalid",
    "SnapshotCorrupt",
    "IoError",
    "ExperimentReport",
    "run_experiment",
    "write_report",
    "GridSpec",
    "ScalarField",
    "integrate",
    "laplacian",
    "norms",
    "FlowState",
    "SchemeConfig",
    "evolve",
    "init_state",
    "DistanceMatrix",
    "StencilSpec",
    "TorusPoint",
    "conformal_distance_matrix",
    "flat_distance",
    "emit_plots",
    "Skeleton",
    "build_initial_factor",
    "build_skeleton",
    "calibrate_width",
    "distance_to_skeleton",
    "read_snapshot",
    "read_snapshot_header",
    "write_snapshot",
]
