"""Data-driven output regulation.

Synthesizes internal-model controllers for unknown linear, nonlinear and
multi-agent systems directly from noisy input-state data, and verifies
tracking in closed-loop simulation.
"""

__version__ = "0.1.0"

from ._kernels import NUMBA_ENABLED
from .datagen import (DataSet, EllipsoidSet, ExperimentConfig, delta_bound,
                      ellipsoid, export_dataset, import_dataset, membership,
                      rank_check, run_experiment)
from .errors import (AssumptionViolated, ComplexSpectrum, Diverged, EmptySet,
                     ExperimentDiverged, Infeasible, NumericalFailure,
                     RegulataError)
from .internal_model import (Exosystem, InternalModel, KFoldExosystem,
                             build_exosystem, internal_model, k_fold,
                             kth_order_internal_model, s_ell)
from .lmi import (LmiProblem, LmiSolution, RobustnessReport, assemble,
                  consistent_center, export_lmi, extract_gain,
                  sample_consistent, solve, verify_robust)
from .mas import (FleetController, Graph, MasSimResult, agent_block,
                  chain_graph, graph_from_config, load_graph, network_matrix,
                  simulate_fleet, spectrum_decomposition_check,
                  synthesize_fleet, virtual_errors)
from .matrixops import (blockdiag, companion, eigenvalues, is_hurwitz, kron,
                        kron_power, lift_maps, minimal_polynomial,
                        monomial_basis)
from .plants import (AugmentedPlant, LinearPlant, NonlinearPlant, augment,
                     ball_beam_fleet, ball_beam_plant, from_registry,
                     linearize, robot_fleet, robot_plant)
from .regulator import (Controller, OreSolution, SimResult,
                        simulate_closed_loop, solve_ore, synthesize_linear,
                        synthesize_nonlinear_k, tracking_metrics)

__all__ = [name for name in dir() if not name.startswith("_")]
