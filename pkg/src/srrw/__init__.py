"""Self-repellent random walks on graphs: sampler, mean-field ODE and covariance analytics."""

from .asymptotics import (AsymptoticCovariance, covariance_U, covariance_U_fundamental, covariance_V,
                          covariance_V_integral, loewner_gap, reduction_bound, sampling_variance)
from .chain import (ReversibleKernel, Spectrum, build_mhrw, build_srw, compute_spectrum, slem,
                    verify_dbe)
from .config import ExperimentConfig
from .estimators import RunningEstimator, empirical_clt_covariance, mse, psi, psi_reweighted, tvd
from .graph import Graph, degree, erdos_renyi, largest_connected_component, load_edge_list, read_edge_list
from .kernel import kernel_matrix, kernel_row, sample_next, stationary_of, verify_scale_invariance
from .ode import drift, integrate, jacobian_at_mu, jacobian_fd, lyapunov, lyapunov_derivative
from .process import (AlphaSchedule, EmpiricalMeasure, RunConfig, RunState, TruncationFamily, init_measure,
                      run, run_ensemble, step, step_truncated)

__version__ = "0.1.0"

__all__ = [
    "AlphaSchedule", "AsymptoticCovariance", "EmpiricalMeasure", "ExperimentConfig", "Graph",
    "ReversibleKernel", "RunConfig", "RunState", "RunningEstimator", "Spectrum", "TruncationFamily",
    "build_mhrw", "build_srw", "compute_spectrum", "covariance_U", "covariance_U_fundamental",
    "covariance_V", "covariance_V_integral", "degree", "drift", "empirical_clt_covariance",
    "erdos_renyi", "init_measure", "integrate", "jacobian_at_mu", "jacobian_fd", "kernel_matrix",
    "kernel_row", "largest_connected_component", "load_edge_list", "loewner_gap", "lyapunov",
    "lyapunov_derivative", "mse", "psi", "psi_reweighted", "read_edge_list", "reduction_bound", "run",
    "run_ensemble", "sample_next", "sampling_variance", "slem", "stationary_of", "step",
    "step_truncated", "tvd", "verify_dbe", "verify_scale_invariance",
]
