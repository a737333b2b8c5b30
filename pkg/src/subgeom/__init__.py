"""Subgeometric ergodicity toolkit: rate functions, generators, model zoo,
path simulation, tail/TV estimators and an experiment harness."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .ratefn import (MonotoneFn, LyapunovTriple, BoundParams, RateAssembly, power, constant,
                     invert_monotone, l_eps_q, g_h_inverse, excursion_threshold, xi_transform,
                     assemble_rate, rate_from_triple)
from .zoo import preset, lyapunov, PRESETS
from .genkit import verify_drift, model_generator, closed_form_generator
from .pathsim import (simulate_diffusion, simulate_levy_ou, simulate_hamiltonian,
                      sample_stopping, occupation_tail, StoppingSpec)
from .stats import (empirical_survival, loglog_slope, stretched_slope, tv_distance_1d,
                    compare_to_bound, check_maximal_inequality, check_drift_along_paths,
                    excursion_tail_check, TailEstimate, SlopeFit, BoundCurve)
