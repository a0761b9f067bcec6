"""fadefree: receiver DSP for dispersion-uncompensated IM/DD links.

Adaptive equalization opens the eye, a Yule-Walker post-filter whitens
the equalizer's colored residual noise, and a fixed-state Log-MAP
detector resolves the post-filter's known ISI with compute and state
storage that stay linear in the number of surviving states instead of
exponential in the channel memory.
"""

from .channel import (ChannelConfig, SpectrumEstimate, add_awgn, apply_fiber_cd,
                      apply_front_end, estimate_power_spectrum, mzm_modulate,
                      smallsignal_response, spectral_null_frequencies,
                      square_law_detect)
from .detect import (BruteForceResult, DetectorRun, FixedStateLogMapDetector,
                     LogMapDetector, Trellis, ViterbiDetector, branch_metric,
                     brute_force_oracles, build_trellis, complexity_report,
                     fixed_state_logmap, hard_decide, logmap_full, max_star,
                     state_index, viterbi_mlse)
from .equalize import (DfeEqualizer, PnleEqualizer, load_weights_csv,
                       residual_noise, save_weights_csv)
from .errors import (ConfigError, DegenerateInputError, FadefreeError,
                     NonStationaryFitError, StageError, StateSpaceError,
                     SyncNotFoundError, UnstableEqualizerError)
from .pipeline import (BerPoint, BerReport, DetectorSpec, PipelineConfig,
                       SweepAxes, net_rate, paper_scale_config, run_pipeline,
                       sweep, wilson_interval)
from .signal_core import (SampledWaveform, SymbolFrame, matched_filter,
                          pam2_demap, pam2_map, prbs_generate, prbs_period,
                          quantize_uniform, resample_rational, rrc_shape,
                          rrc_taps, synchronize)
from .whiten import (NoiseWhitener, WhitenedChannel, autocorrelation,
                     fit_noise_whitener, postfilter_apply, spectral_flatness,
                     yule_walker_fit)

__version__ = "0.1.0"
