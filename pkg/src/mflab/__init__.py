"""Numerical laboratory for wide recurrent networks trained online on
dependent data: finite-width training, mean-field memory chains, and the
kernel gradient-flow limit."""

from .core import (Activation, ClipSpec, ConfigError, DomainError, FuncH,
                   MeasureSample, RateFit, act_eval, clip_deriv, clip_eval,
                   feedback_integral, fit_rate, h1_distance_sq,
                   measure_feedback, sample_lambda)
from .dynamics import (AssumptionReport, DataState, DynamicsSpec,
                       initial_state, make_builtin, mixing_burn_in, step_data,
                       validate_assumptions)
from .network import (HiddenState, ModelConfig, ParamSet, StepInfo, TrainLog,
                      drift, g_readout, grad_check, init_params, memory_step,
                      predict, run_training, sgd_tbptt_step, zero_hidden)
from .meanfield import (ErrorDiag, MemoryChainState, chain_start,
                        default_test_functions, error_diag, increment_actual,
                        increment_delta1, kernel_k, kernel_tilde, step_h,
                        step_hn, step_v, varsigma)
from .limit_ode import (KernelGram, LimitTrajectory, StationarySample,
                        StepSizeError, build_gram, closed_form, g_limit_eval,
                        integrate, loss_curve, max_stable_dt, sample_mu)
from .harness import CommandResult, HarnessConfig

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
