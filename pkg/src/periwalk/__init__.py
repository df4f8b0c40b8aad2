"""Effective diffusivity of periodic continuous-time random walks.

The package computes the macroscale diffusion matrix of a walk on a
periodic, weighted, directed graph two independent ways, by exact linear
algebra on the quotient graph and by Monte Carlo mean squared displacement,
and ships the obstructed-lattice geometries used to study how path length,
node interactions, and diagonal jumps shape the answer.
"""

from .errors import (BrokenPath, ConditionNotMet, DanglingEdge,
                     DegenerateGrid, DriftNotCentered, DuplicateEdge,
                     DuplicateNode, EmptyGraph, GraphError, Inconsistent,
                     InvalidResolution, NonPositiveEntry, NonPositiveRate,
                     NotAPermutation, NotReversible, NotStronglyConnected,
                     PeriwalkError, ReflectionOverflow, SelfEdge,
                     SolveFailed, SolverError)
from .geometry import (InteractionKind, ObstructionSpec,
                       build_diagonal_lattice, build_obstructed_lattice,
                       build_unobstructed_lattice, reflection_permutation,
                       reflection_permutations, whirlpool_fixture)
from .graph import (QuotientEdge, QuotientGraph, build_quotient_graph,
                    dump_graph, lift_displacement, load_graph, parse_graph,
                    project_edges, save_graph)
from .homogenize import (HomogenizationResult, analyze,
                         check_detailed_balance, check_null_drift,
                         check_symmetry_null_drift, diffusivity_C,
                         diffusivity_K, drift_field, long_run_drift,
                         rate_matrix, unit_cell_omega, unit_cell_sigma)
from .simulate import (MsdEstimate, ReflectingWalkConfig, WalkState,
                       default_time_grid, estimate_msd, fit_diffusivity,
                       format_msd_csv, occupation_fractions, read_msd_csv,
                       reflect_segment, simulate_ctmc, write_events_csv,
                       write_msd_csv)
from .variational import (DirectionPotential, MinimizerCheck, divergence,
                          divergence_theorem, energy, ensure_reversible,
                          gradient, is_reversible, k_representation,
                          potential_for_direction, verify_minimizer)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
