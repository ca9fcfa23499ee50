"""Two resonant detectors reading one bosonic mode: statistics and null tests."""

__version__ = "0.1.0"

from .errors import (ApproximationDomain, BarpairError, ConfigError,
                     CutoffOverflow, EnvelopeTooTight, GridTooSmall,
                     InsufficientSamples, NonConvergedTail, NonFinite,
                     NotPRepresentable, QuadratureNotConverged,
                     UndefinedForVacuum, VacuumDetectors, ZeroMarginalMean,
                     ZeroP1)
from .field_states import (ClassicalP, CutoffPolicy, FieldMoments, FieldState,
                           classical_p_sampler, compute_moments, from_matrix,
                           make_coherent, make_fock, make_squeezed,
                           make_thermal, moments_from_matrix)
from .evolution import (CouplingParams, JointDetectorState, evolve,
                        evolve_approx_classical, evolve_approximate,
                        evolve_exact, evolve_sequential,
                        fock_click_pmf_closed_form, joint_state_trace_distance,
                        trace_distance)
from .channels import (ClickPmf, GridAxis, GridPdf, SampleBatch, click_pmf,
                       heterodyne_density, homodyne_pdf, read_batch_csv,
                       sample_clicks, sample_heterodyne, sample_homodyne,
                       write_batch_csv)
from .correlators import (CorrelatorReport, Estimate, NullTestVerdict,
                          analytic_click_covariance, analytic_heterodyne_cross,
                          analytic_heterodyne_re_covariance,
                          analytic_homodyne_covariance, analytic_R,
                          bootstrap_covariance, estimate_covariance,
                          estimate_g2_from_clicks, estimate_g2_ratio, g1_cross,
                          null_test)
from .oracles import (OraclePmf, oracle_click_pmf, oracle_gaussian_joint,
                      oracle_moments_from_pmf)
from .rates import (ALUMINUM_SOUND_SPEED, NEWTON_G, Absorption, DetectorSpec,
                    gamma0_rate, required_occupancy,
                    stimulated_absorption_probability)
from .cli import ExperimentConfig, compare_g2, load_config, run_experiment
