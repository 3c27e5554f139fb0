"""Reduced dynamics of generalized spin-boson models: survival-operator
solvers, amplitude-damping channel families, divisibility classification
and quantum-regression checks against exact truncated-Fock simulation."""

from .spectral import (BoxWindow, DiscretizedBath, Flat, FormFactor, Lorentzian,
                       MemoryKernel, ModelSpec, Tabulated, discretize_bath,
                       eval_kernel, load_model, model_from_dict, uniform_grid)
from .dynamics import (GKLSGenerator, SurvivalOperator, closed_form_flat,
                       gkls_generator, operator_norm, semigroup_residual,
                       solve_survival, survival_from_csv, survival_to_csv)
from .channels import (ChannelFamily, ChoiMatrix, DensityBlock, apply_block_map, apply_channel,
                       choi, choi_from_kraus, is_cp, is_positive_map, kraus_set,
                       propagator, superoperator_matrix)
from .divisibility import DivisibilityReport, classify, trace_norm_contraction_scan
from .fock import (FockBasis, JointState, SparseHamiltonian, apply_system_operator,
                   basis_state, build_basis, build_hamiltonian, evolve, evolve_grid,
                   extract_survival)
from .regression import (CorrelationSpec, JointWorkspace, ProfileIdentityReport,
                         RegressionReport, convergence_sweep, intertwining_residual,
                         lhs_correlation, photon_profile_identities, regression_gap,
                         rhs_correlation)
from . import errors

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
