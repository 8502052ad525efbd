"""NV charge-state photodynamics under combined green and IR excitation.

Seven-level rate-equation model, exact steady states and pulse-sequence
simulation, closed-form fast-quench formulas, and cross-section estimation.
"""

from .analysis import (FitResult, QuenchPoint, effective_isc_rate,
                       fit_quench_curves, measure_quench_from_trace,
                       qss_quench_ratio_nv0, qss_quench_ratio_nvm,
                       read_quench_points_csv, refine_by_trace_fit,
                       synthesize, write_quench_points_csv)
from .dynamics import (GREEN_STEADY_STATE, Channel, PulseSegment,
                       PulseSequence, Trace, evolve, green_only_steady_state,
                       pl_signal, simulate_sequence, steady_state)
from .errors import (ConfigError, DegenerateSteadyStateError, EvolveError,
                     FitError, NonConvergenceError, NumericalError,
                     NVChargeError, ParameterAtBoundError, ProfileError,
                     RankDeficientError)
from .experiments import (IROptimum, NVProfile, PowerGrid,
                          charge_population_curve, default_power_grid,
                          nvm_fraction, optimize_ir_power,
                          steady_state_pl_map)
from .levels import N_LEVELS, LevelIndex
from .params import (CrossSectionSet, LaserField, OpticalSetup,
                     PhotophysicsParams, Profile, builtin_profile,
                     load_profile, save_profile)
from .rates import build_rate_matrix, photon_rate

__version__ = "0.1.0"
