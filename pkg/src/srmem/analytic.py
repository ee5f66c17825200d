"""Closed-form linear-response results used as solver oracles.

The control-free medium acts on the probe as a linear filter: a
resonant Lorentzian line of half-width gamma and optical depth d gives
the amplitude transfer function

    H(delta) = exp(-(d/2) / (1 + i delta/gamma)),

obtained from the Laplace-domain propagation solution evaluated on the
imaginary axis.  Applying H in the Fourier domain reproduces both the
attenuated transmitted pulse and the collective emission tail, entirely
independently of the time-domain integrator, which makes it a strict
verification oracle for absorption runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import MediumParams, ModelError, PulseSpec, RisingExponential

# frequency-domain sampling requirements for the FFT oracle
MIN_PADDING_FACTOR = 8.0
MAX_DELTA_SPACING = 1.0 / 50.0  # units of gamma
TAIL_INTENSITY_BOUND = 1e-6


class OracleError(ValueError):
    """Analytic evaluation outside its domain of validity."""


class RegimeError(OracleError):
    """Requested parameters violate the regime of the closed form."""


def transfer_function(medium: MediumParams, delta: np.ndarray) -> np.ndarray:
    """Amplitude transfer H(delta) across the medium; delta in units of gamma."""
    delta = np.asarray(delta, dtype=float)
    return np.exp(-0.5 * medium.d / (1.0 + 1j * delta))


@dataclass(frozen=True)
class LinearResponse:
    """Transfer function samples H(delta) on a detuning grid (units of gamma)."""

    delta: np.ndarray
    h: np.ndarray

    @classmethod
    def from_medium(cls, medium: MediumParams, delta: np.ndarray) -> "LinearResponse":
        delta = np.asarray(delta, dtype=float)
        return cls(delta=delta, h=transfer_function(medium, delta))

    @property
    def resonant_transmission(self) -> float:
        """Intensity transmission at line centre, exp(-d)."""
        idx = int(np.argmin(np.abs(self.delta)))
        return float(np.abs(self.h[idx]) ** 2)


def analytic_transmission(medium: MediumParams, probe: PulseSpec,
                          times: np.ndarray,
                          check_tail: bool = True) -> np.ndarray:
    """Control-free output field at zeta=1 for the given input probe.

    Fourier-transforms the input, multiplies by H(delta), and transforms
    back; ``times`` is the (strictly increasing) grid on which the output
    is returned.  Raises :class:`OracleError` if the grid ends while the
    emission tail still carries more than ``1e-6`` of the peak input
    intensity.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2:
        raise OracleError("need a 1D time grid with at least two points")
    if not np.all(np.diff(times) > 0.0):
        raise OracleError("time grid must be strictly increasing")

    lo, hi = probe.support()
    span = hi - lo
    if span <= 0.0:
        raise OracleError("probe support is empty")

    # internal uniform grid: fine enough for the envelope, long enough to
    # resolve the Lorentzian line (delta spacing <= gamma/50) and to let
    # the slowest tail component decay away before the circular wrap.
    dt = span / 4096.0
    if isinstance(probe, RisingExponential):
        dt = min(dt, probe.t_fall / 20.0, probe.t_rise / 40.0)
    t_begin = min(lo, times[0])
    t_stop = max(times[-1], hi + 40.0, hi + MIN_PADDING_FACTOR * span)
    total = max(t_stop - t_begin, 2.0 * math.pi / MAX_DELTA_SPACING)
    n = 1 << int(math.ceil(math.log2(total / dt + 1.0)))
    grid = t_begin + dt * np.arange(n)

    e_in = probe.sample(grid)
    delta = 2.0 * math.pi * np.fft.fftfreq(n, d=dt)
    e_out = np.fft.ifft(np.fft.fft(e_in) * transfer_function(medium, delta))

    out = np.interp(times, grid, e_out.real) + 1j * np.interp(times, grid, e_out.imag)
    if check_tail:
        peak = float(np.max(np.abs(e_in) ** 2))
        if peak > 0.0 and abs(out[-1]) ** 2 > TAIL_INTENSITY_BOUND * peak:
            raise OracleError(
                "time grid too short: boundary intensity "
                f"{abs(out[-1])**2:.3e} exceeds {TAIL_INTENSITY_BOUND:g} of the input peak")
    return out


def optimal_probe_duration(d: float, gamma_total: float = 2.0) -> float:
    """Probe duration matching the collective emission decay time.

    Returns (1/Gamma) / (1 + d/4) where ``gamma_total`` is the full
    linewidth Gamma = 2*gamma; with the default Gamma = 2 the result is
    in units of 1/gamma.
    """
    if d < 0.0:
        raise OracleError(f"optical depth must be >= 0, got {d}")
    if gamma_total <= 0.0:
        raise OracleError(f"Gamma must be > 0, got {gamma_total}")
    return (1.0 / gamma_total) / (1.0 + d / 4.0)


def collective_decay_time(medium: MediumParams) -> float:
    """Dimensionless 1/e intensity decay time of the emission burst."""
    return optimal_probe_duration(medium.d, gamma_total=2.0)


def bandwidth_fwhm(probe: PulseSpec) -> float:
    """Bandwidth of the probe from the magnitude spectrum of its intensity.

    Computes |I(omega)| numerically for the intensity envelope
    I(t) = |field(t)|^2 and returns (full width at half maximum)/2pi, in
    cycles per unit dimensionless time (multiply by gamma for Hz).
    """
    lo, hi = probe.support()
    span = hi - lo
    if span <= 0.0:
        raise OracleError("probe support is empty")
    dt = span / 8192.0
    if isinstance(probe, RisingExponential):
        dt = min(dt, probe.t_fall / 40.0)
    n = 1 << int(math.ceil(math.log2(32.0 * span / dt)))
    grid = lo + dt * np.arange(n)
    intensity = np.abs(probe.sample(grid)) ** 2
    spec = np.abs(np.fft.rfft(intensity))
    omega = 2.0 * math.pi * np.fft.rfftfreq(n, d=dt)

    peak_idx = int(np.argmax(spec))
    half = spec[peak_idx] / 2.0
    above = spec >= half
    # unimodality: the half-max region must be one contiguous block at DC
    edges = np.flatnonzero(np.diff(above.astype(int)))
    if not above[0] or edges.size != 1:
        raise OracleError("intensity spectrum is not unimodal")
    k = edges[0]  # last index above half
    # linear interpolation of the crossing
    w = omega[k] + (half - spec[k]) * (omega[k + 1] - omega[k]) / (spec[k + 1] - spec[k])
    return 2.0 * w / (2.0 * math.pi)


@dataclass(frozen=True)
class WritingStageSolution:
    """Damped Rabi solution for the polarization-to-spin transfer."""

    tau: np.ndarray       # time since control onset
    p: np.ndarray         # polarization amplitude p(tau)
    s: np.ndarray         # spin-wave amplitude s(tau)

    @property
    def p_final(self) -> complex:
        return complex(self.p[-1])

    @property
    def s_final(self) -> complex:
        return complex(self.s[-1])


def writing_stage_solution(medium: MediumParams, omega: float, t_c: float,
                           p0: complex = 1.0 + 0.0j,
                           n_times: int = 201) -> WritingStageSolution:
    """Analytic write-stage evolution for a square control pulse.

    In the fast-control regime (Omega >> gamma(1+d), both in units of
    gamma) the polarization follows a damped cosine at half the Rabi
    frequency and the spin wave accumulates the corresponding integral;
    for a pi-area pulse the transfer is lossless up to O(A/Omega), with
    A = 1 + d the collective damping scale.
    """
    if t_c <= 0.0:
        raise OracleError(f"control duration must be > 0, got {t_c}")
    a = 1.0 + medium.d
    if omega <= a:
        raise RegimeError(
            f"fast-control regime requires Omega >> gamma(1+d): got Omega = {omega:g} gamma "
            f"with gamma(1+d) = {a:g} gamma")
    tau = np.linspace(0.0, t_c, n_times)
    envelope = np.exp(-0.5 * a * tau)
    p = p0 * envelope * np.cos(0.5 * omega * tau)
    # integral of exp(-a t/2) cos(omega t/2) from 0 to tau, closed form
    denom = 0.25 * (a * a + omega * omega)
    integral = (envelope * (-0.5 * a * np.cos(0.5 * omega * tau)
                            + 0.5 * omega * np.sin(0.5 * omega * tau))
                + 0.5 * a) / denom
    s = 0.5j * omega * p0 * integral
    return WritingStageSolution(tau=tau, p=p, s=s)


@dataclass(frozen=True)
class ControlRequirement:
    """Peak Rabi frequency and duration for fast, pi-area write pulses."""

    omega: float      # peak Rabi frequency, rad/s (units of gamma if gamma=1)
    duration: float   # full width (square) or FWHM (gaussian), seconds
    shape: str


def fast_control_requirement(d: float, gamma: float = 1.0,
                             shape: str = "square") -> ControlRequirement:
    """Control strength needed for near-lossless writing at depth d.

    Square pulses: duration one tenth of the collective decay time with
    pi area, so Omega = 10 pi Gamma (1 + d/4).  Gaussian pulses: peak
    Rabi frequency 24 gamma (1 + d/4), with the FWHM chosen for pi area.
    """
    if d < 0.0:
        raise OracleError(f"optical depth must be >= 0, got {d}")
    if gamma <= 0.0:
        raise OracleError(f"gamma must be > 0, got {gamma}")
    gamma_total = 2.0 * gamma
    scale = 1.0 + d / 4.0
    if shape == "square":
        t_sr = (1.0 / gamma_total) / scale
        duration = t_sr / 10.0
        omega = math.pi / duration
    elif shape == "gaussian":
        omega = 24.0 * gamma * scale
        duration = math.pi / (omega * math.sqrt(math.pi / (4.0 * math.log(2.0))))
    else:
        raise OracleError(f"unknown control shape {shape!r}")
    return ControlRequirement(omega=omega, duration=duration, shape=shape)
