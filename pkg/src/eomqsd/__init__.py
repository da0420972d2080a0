"""Quantum-state-diffusion simulation of electro-opto-mechanical memory and transduction."""

__version__ = "0.1.0"

from .errors import (BistabilityError, CapacityError, ConfigError, DomainError,
                     EomqsdError, InvalidBasisError, IterationLimitError, MetricError,
                     OracleCapError, OutputExistsError, ReportError, ScheduleError,
                     StepSizeError, TruncationError, UnknownModeError)
from .fock import (MECHANICAL, MICROWAVE, OPTICAL, BasisDescriptor, DensityMatrix,
                   StateVector, apply_ladder, expectation_number, fock_state, make_basis,
                   partial_trace, tensor_product_state)
from .metrics import pure_state_fidelity, trace_distance, uhlmann_fidelity
from .protocols import (ELECTROMECHANICAL, OPTOMECHANICAL, Pulse, PulseSchedule, coupling_at,
                        memory_schedule, separation_percent, transduction_schedule)
from .qsd import (HamiltonianSpec, NoiseChannel, ThermalProductInput, integrate_trajectory,
                  qsd_step, run_ensemble)
from .states import (InputStateSpec, analytic_coherent_fidelity, cat_state, coherent_state,
                     fock_superposition, sample_thermal_fock, squeezed_coherent_state,
                     thermal_saturation_fidelity, zeta)
