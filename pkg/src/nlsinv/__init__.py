"""Split-step spectral solver for 1D nonlinear Schrodinger problems and
gradient-based inversion of dictionary-parameterized potentials."""

from .adjoint import (FDSpec, GradientReport, coupled_grad_zetas, fd_gradient,
                      misfit_grad_coeffs, misfit_grad_V)
from .coupled import (CoupledDataset, CoupledField, CoupledParams,
                      coupled_linear_symbols, coupled_loss,
                      coupled_nonlinear_step, coupled_propagate)
from .grids import (Grid1D, SpectralSymbol, WaveField, apply_symbol,
                    make_grid, rel_err_vector, rel_misfit,
                    spectral_derivative)
from .library import (DictionaryMatrix, Library, assemble, default_library,
                      library_from_names, library_from_pairs,
                      parse_expression, soft_threshold, synthesize)
from .propagator import (LinearStepSpec, ProblemParams, PropagationTape,
                         direct_kernel, first_order_propagate, linear_symbol,
                         nonlinear_step, propagate)
from .scenarios import (ConvergenceTable, convergence_study, coupled_dataset,
                        get_scenario, landscape_scan, residual_check,
                        scenario_example1, scenario_example2,
                        scenario_example3, single_dataset)
from .training import (CoeffProblem, LRSchedule, TrainConfig, TrainRecord,
                       initial_coeffs, train_coeffs, train_zetas)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
