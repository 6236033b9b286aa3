"""Decoding probability of wireless-powered backscatter sensor networks.

Analytical (characteristic-function inversion) and Monte Carlo
evaluation of the probability that a reader decodes a randomly located
backscatter sensor, under three collision-resolution techniques:
sectorized directional antennas, ultra-narrow-band random FDMA, and
successive interference cancellation.
"""

from .analysis import (AnalysisError, AnalyticResult, cancel_probability,
                       cdf_from_cf, chi, decode_after_cancel,
                       decoding_probability, decoding_probability_high_power,
                       interference_cf, noise_limited_probability,
                       sic_decoding_probability)
from .channel import (Annulus, FadingModel, fading_cdf, fading_cf, fading_sf,
                      nth_nearest_mass, nth_nearest_pdf, product_fading_pdf,
                      sample_fading, sample_typical_distance,
                      typical_distance_pdf)
from .mcsim import (CfEstimate, McEstimate, NetworkRealization, StageCounters,
                    empirical_cf, estimate_decoding_probability, estimate_sic,
                    realize_network, sinr_typical, wilson_interval)
from .numerics import (ConvergenceError, QuadratureResult, QuadratureSpec,
                       bessel_i0, bessel_k0, integrate_adaptive,
                       integrate_semi_infinite, principal_power, upper_gamma)
from .params import SystemParams

__version__ = "0.1.0"

__all__ = [
    "AnalysisError", "AnalyticResult", "Annulus", "CfEstimate",
    "ConvergenceError", "FadingModel", "McEstimate", "NetworkRealization",
    "QuadratureResult", "QuadratureSpec", "StageCounters", "SystemParams",
    "bessel_i0", "bessel_k0", "cancel_probability", "cdf_from_cf", "chi",
    "decode_after_cancel", "decoding_probability",
    "decoding_probability_high_power", "empirical_cf",
    "estimate_decoding_probability", "estimate_sic", "fading_cdf",
    "fading_cf", "fading_sf", "integrate_adaptive",
    "integrate_semi_infinite", "interference_cf", "nth_nearest_mass",
    "nth_nearest_pdf", "noise_limited_probability", "principal_power",
    "product_fading_pdf", "realize_network", "sample_fading",
    "sample_typical_distance", "sic_decoding_probability", "sinr_typical",
    "typical_distance_pdf", "upper_gamma", "wilson_interval",
]
