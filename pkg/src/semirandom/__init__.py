"""Semi-random graph process: perfect-matching strategies, their fluid-limit
ODEs, lower-bound observables and exact matching checks."""

from .matching import (ApproxPmCertificate, Digraph, check_certificate, construct_S,
                       is_perfect_matching, max_matching)
from .observables import CoverageTracker, certificate, recount, well_behaved_check
from .odelab import (BoundsReport, OdeSolution, OdeSystem, PhaseCascade, assemble_beta,
                     compute_bounds, find_alpha, integrate, lower_bound_system,
                     lower_closed_forms, phase_cascade, phase_system, warmup_system)
from .process import (Arc, ProcessError, ProcessState, Rng, Strategy, StrategyError,
                      Trajectory, new_process, play_round, run_until)
from .strategies import (CleanupConfig, PhasedStrategy, PipelineReport,
                         UniformCircleStrategy, WarmupStrategy, cleanup_run,
                         upper_bound_pipeline)

__version__ = "0.1.0"
