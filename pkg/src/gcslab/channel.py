"""Channel models: noise-variance budgets and the training/test channels.

Two additive-noise budgets are supported: plain AWGN set by an SNR, and an
optical-link budget where amplifier noise (ASE) adds to nonlinear
interference (NLIN) whose variance grows with the cube of the launch power
and with the constellation's 4th/6th magnitude moments.

The training channel applies additive noise followed by a residual phase
rotation, y = (x + n) e^{i phi}; the test channel applies a laser phase walk
before the additive noise, z = x e^{i phi} + n.  For fixed draws both are
simple smooth maps of x, which is what the end-to-end optimizer
differentiates through.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constellation import ConstellationMoments

PLANCK_H = 6.62607015e-34  # J s, SI defining constant


class InvalidCoefficientsError(ValueError):
    """NLIN coefficients produce a negative variance."""


@dataclass(frozen=True)
class AwgnSpec:
    """AWGN operating point; noise variance is 1/SNR for a unit-power signal."""

    snr_db: float

    def __post_init__(self):
        if not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")


@dataclass(frozen=True)
class RpnSpec:
    """Residual phase noise: i.i.d. zero-mean Gaussian phase, variance in rad^2."""

    sigma2_rpn: float

    def __post_init__(self):
        if not (self.sigma2_rpn >= 0.0):
            raise ValueError("sigma2_rpn must be >= 0")


@dataclass(frozen=True)
class WienerSpec:
    """Laser phase walk: combined TX+RX linewidth and symbol rate."""

    linewidth_hz: float
    symbol_rate_hz: float

    def __post_init__(self):
        if not (self.linewidth_hz >= 0.0):
            raise ValueError("linewidth_hz must be >= 0")
        if not (self.symbol_rate_hz > 0.0):
            raise ValueError("symbol_rate_hz must be > 0")

    @property
    def increment_variance(self) -> float:
        """Per-symbol phase increment variance, 2*pi*linewidth/symbol_rate."""
        return 2.0 * np.pi * self.linewidth_hz / self.symbol_rate_hz


@dataclass(frozen=True)
class LinkParams:
    """Fiber link constants plus the two operating-point knobs (F_n, P_in).

    Defaults describe the studied link: 5 x 50 GHz WDM channels at 32 GBaud,
    dual polarization, 10 x 100 km spans with lumped amplification that
    exactly compensates the span loss.
    """

    symbol_rate_hz: float = 32e9
    carrier_freq_hz: float = 193.41e12
    num_channels: int = 5
    channel_spacing_hz: float = 50e9
    num_polarizations: int = 2
    num_spans: int = 10
    span_length_km: float = 100.0
    attenuation_db_per_km: float = 0.2
    amp_gain_db: float = 20.0
    nonlinear_coeff_per_w_km: float = 1.3
    dispersion_ps_per_nm_km: float = 16.464
    noise_figure_db: float = 6.0
    launch_power_dbm: float = 0.0

    def __post_init__(self):
        positive = (
            "symbol_rate_hz",
            "carrier_freq_hz",
            "num_channels",
            "channel_spacing_hz",
            "num_polarizations",
            "num_spans",
            "span_length_km",
            "attenuation_db_per_km",
            "nonlinear_coeff_per_w_km",
            "dispersion_ps_per_nm_km",
        )
        for name in positive:
            if not (getattr(self, name) > 0):
                raise ValueError(f"{name} must be > 0")
        span_loss = self.span_length_km * self.attenuation_db_per_km
        if abs(self.amp_gain_db - span_loss) > 1e-9:
            raise ValueError(
                f"amp_gain_db={self.amp_gain_db} must equal span loss {span_loss} dB"
            )


@dataclass(frozen=True)
class NlinCoefficients:
    """Affine-in-moments, cubic-in-power NLIN variance coefficients (W^-2)."""

    kappa0: float
    kappa1: float
    kappa2: float

    def __post_init__(self):
        if not (self.kappa0 > 0.0):
            raise ValueError("kappa0 must be > 0")


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def awgn_variance(spec: AwgnSpec) -> float:
    """Additive noise variance 1/SNR for a unit-power constellation."""
    return 10.0 ** (-spec.snr_db / 10.0)


def ase_variance(link: LinkParams) -> float:
    """Per-polarization ASE variance in W over the link's Nyquist bandwidth.

    N_sp * (F_lin/2) * (G_lin - 1) * h * f_c * R_s; unity gain gives zero.
    """
    f_lin = db_to_linear(link.noise_figure_db)
    g_lin = db_to_linear(link.amp_gain_db)
    return (
        link.num_spans
        * (f_lin / 2.0)
        * (g_lin - 1.0)
        * PLANCK_H
        * link.carrier_freq_hz
        * link.symbol_rate_hz
    )


def nlin_variance(
    coeffs: NlinCoefficients, launch_power_w: float, moments: ConstellationMoments
) -> float:
    """Nonlinear interference variance P^3 (k0 + k1 mu4 + k2 mu6), in W."""
    if launch_power_w < 0.0:
        raise ValueError("launch power must be >= 0")
    var = launch_power_w**3 * (
        coeffs.kappa0 + coeffs.kappa1 * moments.mu4 + coeffs.kappa2 * moments.mu6
    )
    if var < 0.0:
        raise InvalidCoefficientsError(
            f"negative NLIN variance {var} for moments {moments}"
        )
    return var


def total_noise_variance(
    link: LinkParams, coeffs: NlinCoefficients, moments: ConstellationMoments
) -> float:
    """ASE plus NLIN variance in W at the link's launch power."""
    p_w = dbm_to_watts(link.launch_power_dbm)
    return ase_variance(link) + nlin_variance(coeffs, p_w, moments)


def draw_complex_noise(rng: np.random.Generator, n: int, variance: float) -> np.ndarray:
    """Circularly symmetric complex Gaussian draws, sigma^2/2 per component.

    Draw order is fixed (all real parts, then all imaginary parts) so seeded
    streams are reproducible.
    """
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def training_channel_apply(x, sigma_n2: float, sigma2_rpn: float, rng) -> np.ndarray:
    """Surrogate training channel y = (x + n) e^{i phi}.

    n is circularly symmetric complex Gaussian with variance sigma_n2, phi is
    real zero-mean Gaussian with variance sigma2_rpn.  Accepts a scalar or a
    1-D array of samples.
    """
    if sigma_n2 < 0.0 or sigma2_rpn < 0.0:
        raise ValueError("variances must be >= 0")
    x = np.asarray(x, dtype=np.complex128)
    n = draw_complex_noise(rng, x.size, sigma_n2).reshape(x.shape)
    phi = np.sqrt(sigma2_rpn) * rng.standard_normal(x.size).reshape(x.shape)
    return (x + n) * np.exp(1j * phi)


def wiener_phase_walk(n: int, spec: WienerSpec, rng) -> np.ndarray:
    """Length-n laser phase walk: phi_0 ~ U[0, 2pi), Gaussian increments.

    Increment variance is 2*pi*linewidth/symbol_rate per symbol.
    """
    if n < 1:
        raise ValueError("need at least one symbol")
    phases = np.empty(n, dtype=np.float64)
    phases[0] = rng.uniform(0.0, 2.0 * np.pi)
    if n > 1:
        steps = np.sqrt(spec.increment_variance) * rng.standard_normal(n - 1)
        phases[1:] = phases[0] + np.cumsum(steps)
    return phases


def test_channel_apply(x, phases, sigma_n2: float, rng) -> np.ndarray:
    """Test channel z_k = x_k e^{i phi_k} + n_k."""
    x = np.asarray(x, dtype=np.complex128)
    phases = np.asarray(phases, dtype=np.float64)
    if x.shape != phases.shape:
        raise ValueError(f"length mismatch: {x.shape} symbols vs {phases.shape} phases")
    n = draw_complex_noise(rng, x.size, sigma_n2).reshape(x.shape)
    return x * np.exp(1j * phases) + n
