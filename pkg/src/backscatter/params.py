"""System-level model parameters and their derived quantities.

All power-like fields are linear (never dB): converting dB inputs is the
job of the configuration layer in :mod:`backscatter.cli`.  Derived
quantities follow the collision-resolution model: sectorized antenna
gain G = D / (1 + eps (D - 1)), random-FDMA collision probability
p_c = delta / BW, and the interferer thinning lambda' = p_c * lambda / D.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from .channel import Annulus, FadingModel

__all__ = ["SystemParams"]


@dataclass(frozen=True)
class SystemParams:
    """Scalar model parameters, linear units throughout.

    Defaults are the evaluation setup used for all figures: unit sensor
    density, 20 dB transmit power, reading annulus 1..10 m, path-loss
    exponent 2.5 (doubled by the dyadic channel), -30 dB noise, 12 kHz
    bandwidth with FDMA disabled (delta = BW), a single sector antenna,
    and fully correlated unit-power Rayleigh links.
    """

    lam: float = 1.0              # sensor density [1/m^2]
    p_linear: float = 100.0       # reader transmit power (20 dB)
    sigma2_linear: float = 1e-3   # noise power (-30 dB)
    zeta: float = 1.0             # exclusion-zone radius [m]
    xi: float = 10.0              # maximum reading distance [m]
    alpha: float = 2.5            # path-loss exponent (one-way)
    bw_hz: float = 12e3
    delta_hz: float = 12e3        # collision spacing; delta = BW disables FDMA
    d_sectors: int = 1
    epsilon: float = 0.1          # directional antenna efficiency
    beta: float = 0.6             # reflection coefficient
    rho: float = 1.0              # forward/backscatter amplitude correlation
    tau_linear: float = 1.0       # target SINR threshold (0 dB)
    n_sic: int = 0                # SIC cancellation attempts
    mu_f: float = 1.0             # inverse forward-link variance
    mu_b: float = 1.0             # inverse backscatter-link variance
    fading_free: bool = False

    def __post_init__(self):
        checks = [
            (self.lam >= 0, "lam must be >= 0"),
            (self.p_linear > 0, "p_linear must be > 0"),
            (self.sigma2_linear >= 0, "sigma2_linear must be >= 0"),
            (self.zeta >= 1.0, "zeta must be >= 1"),
            (self.xi > self.zeta, "xi must exceed zeta"),
            (self.alpha > 1.0, "alpha must be > 1"),
            (self.bw_hz > 0, "bw_hz must be > 0"),
            (0.0 <= self.delta_hz <= self.bw_hz, "delta_hz must lie in [0, bw_hz]"),
            (self.d_sectors >= 1 and int(self.d_sectors) == self.d_sectors,
             "d_sectors must be a positive integer"),
            (0.0 <= self.epsilon <= 1.0, "epsilon must lie in [0, 1]"),
            (0.0 <= self.beta <= 1.0, "beta must lie in [0, 1]"),
            (0.0 <= self.rho <= 1.0, "rho must lie in [0, 1]"),
            # tau = 0 is admitted for the simulator (SINR >= 0 always
            # holds); the analytical expressions require tau > 0
            (self.tau_linear >= 0, "tau_linear must be >= 0"),
            (self.n_sic >= 0 and int(self.n_sic) == self.n_sic,
             "n_sic must be a non-negative integer"),
            (self.mu_f > 0 and self.mu_b > 0, "mu_f and mu_b must be > 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(f"SystemParams: {msg}")

    # ---- derived quantities -------------------------------------------------

    @property
    def gain(self):
        """Main-lobe antenna gain G = D / (1 + eps (D - 1))."""
        d = self.d_sectors
        return d / (1.0 + self.epsilon * (d - 1))

    @property
    def p_collision(self):
        """FDMA collision probability p_c = delta / BW."""
        return self.delta_hz / self.bw_hz

    @property
    def thinned_density(self):
        """Density of interfering sensors lambda' = p_c * lambda / D."""
        return self.p_collision * self.lam / self.d_sectors

    @property
    def noise_to_signal(self):
        """sigma^2 / (beta G P): the noise term of the inverted SINR."""
        return self.sigma2_linear / (self.beta * self.gain * self.p_linear)

    @property
    def annulus(self):
        return Annulus(self.zeta, self.xi)

    def fading_model(self):
        return FadingModel(rho=self.rho, mu_f=self.mu_f, mu_b=self.mu_b,
                           fading_free=self.fading_free)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    # dB views, convenience only (conversion into linear happens in cli)
    @property
    def p_db(self):
        return 10.0 * math.log10(self.p_linear)

    @property
    def sigma2_db(self):
        return 10.0 * math.log10(self.sigma2_linear) if self.sigma2_linear > 0 else -math.inf

    @property
    def tau_db(self):
        return 10.0 * math.log10(self.tau_linear) if self.tau_linear > 0 else -math.inf
