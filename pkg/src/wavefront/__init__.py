"""Numerical global wave front sets of sampled tempered signals.

Computes the short-time Fourier transform of signals on centered grids,
estimates directional exponential decay in phase-space cones, and
classifies singular directions; ships generators with closed-form
oracles, symplectic/differential/localization operators with their wave
front maps, executable verification suites, and a JSON-pipeline CLI.
"""

from .core import (ConeSet, DetectConfig, Diagnostics, GridSpec,
                   SampledSignal, WaveFrontReport, Window, WavefrontError,
                   classify, custom_window, default_config, dilated_window,
                   make_grid, standard_window, validate_signal,
                   window_from_tag)
from .detect import (DecayFit, DecayProfile, MatchResult, compare_wf,
                     detect_wf, fit_decay, ray_profile)
from .operators import (LocalizationSymbol, PolyOperator, SymplecticMapSpec,
                        apply_polyop, char_set, chirp_multiply, conjugate,
                        convolve, dilate, fourier, localization_apply,
                        pointwise_product, regularize, schrodinger_propagate,
                        tensor, wf_map)
from .synth import (PrescribedWF, chirp, constant, gaussian, hermite,
                    oracle_stft, prescribed_wf)
from .transform import (STFTField, bargmann_view, parseval_check,
                        stft_adjoint, stft_direct, stft_field)

__version__ = "0.1.0"
