"""Two-class priority queueing-inventory model with base-stock replenishment."""
from .analysis import (BalanceReport, check_cut_total, check_cut_x1, check_cut_x2, check_geometric,
                       check_inventory_flow, check_rate_equations, global_balance_residual)
from .instant import InventoryDistribution, instant_balance_residual, instant_stationary
from .lyapunov import (DriftReport, LyapunovCertificate, check_ergodicity, drift, lyapunov_value,
                       verify_drift_bound)
from .model import ModelError, ModelParams, State, Transition, total_rate, transitions
from .simulator import SimConfig, SimEstimates, simulate, throughput_check, windowed_means
from .solver import (GeneratorMatrix, StationaryDistribution, TruncationSpec, build_generator,
                     enumerate_states, marginal, solve, solve_stationary)

__version__ = "0.1.0"
