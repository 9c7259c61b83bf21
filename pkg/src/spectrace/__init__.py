"""Spectra and regularized first traces of a Sturm-Liouville operator equation
whose boundary condition depends rationally on the spectral parameter."""

from .charroots import (ChannelSpectrum, char_fn, char_fn_imag, enumerate_channel, enumerate_spectrum,
                        solve_negative_root, solve_oscillatory_root, solve_principal_root)
from .config import RunConfig, load_config, parse_config
from .counting import CountingReport, count_below, counting_report, fit_exponent, table_exponents, \
    validity_window
from .discretizer import FormPair, assemble_forms, oracle_spectrum, solve_gevp
from .errors import (InvariantError, NonConvergenceError, NumericalError, PoleProximityError, SpecError,
                     SpectraceError)
from .model import (Branch, ChannelPotential, EigenvalueRecord, OperatorSpec, PotentialSpec, eval_potential,
                    make_operator_spec, operator_from_gammas, trace_endpoint)
from .perturbed import ShootingResult, delta_fn, integrate_ivp, solve_perturbed, solve_perturbed_channel
from .traceform import (NormalizedMode, TraceLedger, channel_elements, fourier_endpoint_limit, identity_residual,
                        matrix_element, norm_H, normalized_mode, pair_and_sum, trace_target, trace_verdict)

__version__ = "0.1.0"
