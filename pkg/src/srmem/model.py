"""Domain types shared by the solver, protocol runners, and CLI.

Everything downstream works in the dimensionless frame

    tau  = gamma * t        (time in units of the optical coherence decay)
    zeta = z / L            (position as a fraction of the medium length)

so a medium is fully characterised by its optical depth ``d`` and the
spin-to-optical decoherence ratio ``gamma_s / gamma``.  The physical rates
are only needed when converting user input (seconds, MHz) in or results
out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

C_LIGHT = 299792458.0  # m/s

# Gaussian envelopes are sampled on a finite window; beyond
# GAUSSIAN_SUPPORT_FWHM half-widths the amplitude is < 3e-8 of the peak.
GAUSSIAN_SUPPORT_FWHM = 2.5
# Rising/falling exponentials are truncated where the field reaches e^-8.
EXP_SUPPORT_DECADES = 8.0

# area of a unit-peak Gaussian of unit FWHM: sqrt(pi / (4 ln 2))
GAUSSIAN_AREA_FACTOR = math.sqrt(math.pi / (4.0 * math.log(2.0)))


class ModelError(ValueError):
    """Invalid physical or numerical parameters."""


@dataclass(frozen=True)
class MediumParams:
    """Ensemble description: optical depth and decoherence rates.

    Parameters
    ----------
    d : float
        On-resonance optical depth (intensity); CW resonant transmission
        is exp(-d).
    gamma : float
        Optical coherence decay rate gamma = Gamma/2 in rad/s.  Leave at
        1.0 to work purely in dimensionless units.
    gamma_s : float
        Spin-wave amplitude decay rate in rad/s (same unit system as
        ``gamma``).  Defaults to 0 (no ground-state decoherence).
    length : float, optional
        Physical medium length in metres; only needed for the coupling
        constant in physical units.
    """

    d: float
    gamma: float = 1.0
    gamma_s: float = 0.0
    length: Optional[float] = None

    def __post_init__(self) -> None:
        if not (self.d >= 0.0 and math.isfinite(self.d)):
            raise ModelError(f"optical depth must be >= 0, got {self.d}")
        if not (self.gamma > 0.0 and math.isfinite(self.gamma)):
            raise ModelError(f"gamma must be > 0, got {self.gamma}")
        if not (self.gamma_s >= 0.0 and math.isfinite(self.gamma_s)):
            raise ModelError(f"gamma_s must be >= 0, got {self.gamma_s}")

    @property
    def gamma_total(self) -> float:
        """Full optical linewidth Gamma = 2*gamma in rad/s."""
        return 2.0 * self.gamma

    @property
    def gamma_s_ratio(self) -> float:
        """Dimensionless spin decay rate gamma_s / gamma."""
        return self.gamma_s / self.gamma

    @property
    def coupling(self) -> float:
        """Collective coupling g*sqrt(N) = sqrt(c d gamma / 2L) in rad/s."""
        if self.length is None or self.length <= 0.0:
            raise ModelError("coupling requires a positive medium length")
        return math.sqrt(C_LIGHT * self.d * self.gamma / (2.0 * self.length))

    # unit conversions -------------------------------------------------
    def to_tau(self, t_seconds: float) -> float:
        """Seconds -> dimensionless time."""
        return self.gamma * t_seconds

    def to_seconds(self, tau: float) -> float:
        """Dimensionless time -> seconds."""
        return tau / self.gamma

    def rabi_to_dimensionless(self, omega_rad_s: float) -> float:
        """Angular Rabi frequency (rad/s) -> units of gamma."""
        return omega_rad_s / self.gamma

    def rabi_to_physical(self, omega_tilde: float) -> float:
        """Rabi frequency in units of gamma -> rad/s."""
        return omega_tilde * self.gamma


# --------------------------------------------------------------------------
# pulse envelopes
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PulseSpec:
    """Base class for pulse envelopes (field amplitude, not intensity).

    All times are dimensionless (units of 1/gamma).  Subclasses provide
    vectorised sampling, the analytic area and energy, and a finite
    support window used by the solver to place segment boundaries.
    """

    amplitude: float = 1.0

    def sample(self, tau: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def area(self) -> float:
        """Integral of the envelope over all time."""
        raise NotImplementedError

    def energy(self) -> float:
        """Integral of |envelope|^2 over all time."""
        raise NotImplementedError

    def support(self) -> tuple[float, float]:
        """(start, end) window outside which the envelope is negligible."""
        raise NotImplementedError

    def breakpoints(self) -> tuple[float, ...]:
        """Times where the envelope or its derivative is discontinuous."""
        return self.support()

    def scaled(self, factor: float) -> "PulseSpec":
        return replace(self, amplitude=self.amplitude * factor)

    def normalized(self) -> "PulseSpec":
        """Copy with unit energy."""
        e = self.energy()
        if not (e > 0.0 and math.isfinite(e)):
            raise ModelError("cannot normalize a pulse with zero or infinite energy")
        return self.scaled(1.0 / math.sqrt(e))

    def _check(self, cond: bool, msg: str) -> None:
        if not cond:
            raise ModelError(msg)


@dataclass(frozen=True)
class RisingExponential(PulseSpec):
    """Exponentially rising probe with a fast exponential fall.

    ``t_rise`` is the 1/e rise time of the *intensity* (the field rises
    with time constant 2*t_rise); ``t_fall`` plays the same role after
    the switch-off at ``t_off``.  Intensity:

        I(t) = A^2 * exp((t - t_off)/t_rise)   for t <= t_off
        I(t) = A^2 * exp(-(t - t_off)/t_fall)  for t >  t_off
    """

    t_rise: float = 1.0
    t_fall: Optional[float] = None
    t_off: float = 0.0

    def __post_init__(self) -> None:
        if self.t_fall is None:
            object.__setattr__(self, "t_fall", self.t_rise / 10.0)
        self._check(self.t_rise > 0.0, f"t_rise must be > 0, got {self.t_rise}")
        self._check(self.t_fall > 0.0, f"t_fall must be > 0, got {self.t_fall}")

    def sample(self, tau: np.ndarray) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        dt = tau - self.t_off
        exponent = np.where(dt <= 0.0, dt / (2.0 * self.t_rise), -dt / (2.0 * self.t_fall))
        out = self.amplitude * np.exp(exponent)
        lo, hi = self.support()
        out[(tau < lo) | (tau > hi)] = 0.0
        return out.astype(np.complex128)

    def area(self) -> float:
        return self.amplitude * 2.0 * (self.t_rise + self.t_fall)

    def energy(self) -> float:
        return self.amplitude**2 * (self.t_rise + self.t_fall)

    def support(self) -> tuple[float, float]:
        lo = self.t_off - 2.0 * EXP_SUPPORT_DECADES * self.t_rise
        hi = self.t_off + 2.0 * EXP_SUPPORT_DECADES * self.t_fall
        return (lo, hi)

    def breakpoints(self) -> tuple[float, ...]:
        lo, hi = self.support()
        return (lo, self.t_off, hi)

    @property
    def fwhm_intensity(self) -> float:
        return (self.t_rise + self.t_fall) * math.log(2.0)


@dataclass(frozen=True)
class GaussianPulse(PulseSpec):
    """Gaussian field envelope; ``fwhm`` refers to the field amplitude."""

    fwhm: float = 1.0
    t_center: float = 0.0

    def __post_init__(self) -> None:
        self._check(self.fwhm > 0.0, f"fwhm must be > 0, got {self.fwhm}")

    def sample(self, tau: np.ndarray) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        arg = 4.0 * math.log(2.0) * ((tau - self.t_center) / self.fwhm) ** 2
        out = self.amplitude * np.exp(-arg)
        lo, hi = self.support()
        out[(tau < lo) | (tau > hi)] = 0.0
        return out.astype(np.complex128)

    def area(self) -> float:
        return self.amplitude * self.fwhm * GAUSSIAN_AREA_FACTOR

    def energy(self) -> float:
        # |envelope|^2 is a Gaussian of FWHM fwhm/sqrt(2)
        return self.amplitude**2 * self.fwhm * GAUSSIAN_AREA_FACTOR / math.sqrt(2.0)

    def support(self) -> tuple[float, float]:
        half = GAUSSIAN_SUPPORT_FWHM * self.fwhm
        return (self.t_center - half, self.t_center + half)


@dataclass(frozen=True)
class SquarePulse(PulseSpec):
    """Flat-top pulse between ``t_on`` and ``t_off``."""

    t_on: float = 0.0
    t_off: float = 1.0

    def __post_init__(self) -> None:
        self._check(self.t_off > self.t_on,
                    f"square pulse needs t_off > t_on, got [{self.t_on}, {self.t_off}]")

    @property
    def duration(self) -> float:
        return self.t_off - self.t_on

    def sample(self, tau: np.ndarray) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        inside = (tau >= self.t_on) & (tau <= self.t_off)
        return np.where(inside, self.amplitude, 0.0).astype(np.complex128)

    def area(self) -> float:
        return self.amplitude * self.duration

    def energy(self) -> float:
        return self.amplitude**2 * self.duration

    def support(self) -> tuple[float, float]:
        return (self.t_on, self.t_off)


@dataclass(frozen=True)
class SampledPulse(PulseSpec):
    """Envelope given by samples; linearly interpolated, zero outside."""

    times: tuple[float, ...] = ()
    values: tuple[complex, ...] = ()

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values)
        self._check(t.size >= 2, "need at least two samples")
        self._check(t.size == v.size, "times and values must have equal length")
        self._check(bool(np.all(np.diff(t) > 0.0)), "sample times must be strictly increasing")
        self._check(bool(np.all(np.isfinite(t))) and bool(np.all(np.isfinite(v))),
                    "samples must be finite")

    def _arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.asarray(self.times, dtype=float),
                np.asarray(self.values, dtype=np.complex128))

    def sample(self, tau: np.ndarray) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        t, v = self._arrays()
        re = np.interp(tau, t, v.real, left=0.0, right=0.0)
        im = np.interp(tau, t, v.imag, left=0.0, right=0.0)
        return self.amplitude * (re + 1j * im)

    def area(self) -> float:
        t, v = self._arrays()
        return complex(self.amplitude * np.trapezoid(v, t)).real

    def energy(self) -> float:
        t, v = self._arrays()
        return float(self.amplitude**2 * np.trapezoid(np.abs(v) ** 2, t))

    def support(self) -> tuple[float, float]:
        return (self.times[0], self.times[-1])

    def breakpoints(self) -> tuple[float, ...]:
        return self.support()


def sample_pulse(spec: PulseSpec, times: Sequence[float],
                 normalize_energy: bool = False) -> np.ndarray:
    """Sample a pulse envelope on a strictly increasing time grid.

    Returns the complex field amplitude (not intensity).  With
    ``normalize_energy`` the analytic pulse energy is scaled to 1 first.
    """
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ModelError("times must be a non-empty 1D array")
    if t.size > 1 and not np.all(np.diff(t) > 0.0):
        raise ModelError("times must be strictly increasing")
    if normalize_energy:
        spec = spec.normalized()
    return spec.sample(t)


def pulse_area(spec: PulseSpec, rabi_scale: float = 1.0) -> float:
    """Area of a control envelope: integral of rabi_scale * envelope."""
    a = rabi_scale * spec.area()
    if not math.isfinite(a):
        raise ModelError("pulse area is not finite")
    return a


# --------------------------------------------------------------------------
# control schedule
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ControlSchedule:
    """Write/read control pulses with a common peak Rabi frequency.

    ``rabi_scale`` is the peak Rabi frequency in units of gamma; the
    pulse envelopes are kept at unit peak so that the same shapes can be
    reused while scanning control power.
    """

    write: PulseSpec
    read: Optional[PulseSpec] = None
    rabi_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.rabi_scale < 0.0 or not math.isfinite(self.rabi_scale):
            raise ModelError(f"rabi_scale must be finite and >= 0, got {self.rabi_scale}")
        if self.read is not None:
            w0, w1 = self.write.support()
            r0, r1 = self.read.support()
            if r0 < w1:
                raise ModelError(
                    f"read window [{r0:g}, {r1:g}] overlaps write window [{w0:g}, {w1:g}]")

    @property
    def storage_time(self) -> float:
        """Gap between the end of the write window and the read onset."""
        if self.read is None:
            return math.inf
        return self.read.support()[0] - self.write.support()[1]

    @property
    def write_window(self) -> tuple[float, float]:
        return self.write.support()

    @property
    def read_window(self) -> tuple[float, float]:
        if self.read is None:
            raise ModelError("schedule has no read pulse")
        return self.read.support()

    def write_area(self) -> float:
        return pulse_area(self.write, self.rabi_scale)

    def read_area(self) -> float:
        if self.read is None:
            return 0.0
        return pulse_area(self.read, self.rabi_scale)

    def rabi(self, tau: np.ndarray) -> np.ndarray:
        """Dimensionless Rabi envelope Omega(tau)/gamma."""
        out = self.write.sample(tau)
        if self.read is not None:
            out = out + self.read.sample(tau)
        return self.rabi_scale * out

    def peak_rabi(self) -> float:
        peaks = [abs(self.write.amplitude)]
        if self.read is not None:
            peaks.append(abs(self.read.amplitude))
        return self.rabi_scale * max(peaks)

    def breakpoints(self) -> tuple[float, ...]:
        pts = list(self.write.breakpoints())
        if self.read is not None:
            pts.extend(self.read.breakpoints())
        return tuple(pts)

    @classmethod
    def pi_pulses(cls, shape: str, duration: float, write_start: float,
                  storage_time: float, area: float = math.pi,
                  read: bool = True) -> "ControlSchedule":
        """Square or Gaussian write/read pair calibrated to a given area.

        For ``shape='square'`` the duration is the full width; for
        ``'gaussian'`` it is the FWHM of the Rabi envelope and the pulse
        is centred half a support width after ``write_start``.
        """
        if duration <= 0.0:
            raise ModelError("control duration must be > 0")
        if storage_time < 0.0:
            raise ModelError("storage_time must be >= 0")
        if shape == "square":
            omega = area / duration
            write = SquarePulse(t_on=write_start, t_off=write_start + duration)
        elif shape == "gaussian":
            omega = area / (GAUSSIAN_AREA_FACTOR * duration)
            half = GAUSSIAN_SUPPORT_FWHM * duration
            write = GaussianPulse(fwhm=duration, t_center=write_start + half)
        else:
            raise ModelError(f"unknown control shape {shape!r}")
        read_pulse = None
        if read:
            w1 = write.support()[1]
            if shape == "square":
                read_pulse = SquarePulse(t_on=w1 + storage_time,
                                         t_off=w1 + storage_time + duration)
            else:
                half = GAUSSIAN_SUPPORT_FWHM * duration
                read_pulse = GaussianPulse(fwhm=duration,
                                           t_center=w1 + storage_time + half)
        return cls(write=write, read=read_pulse, rabi_scale=omega)


# --------------------------------------------------------------------------
# numerical grid
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Space/time discretisation for the Maxwell-Bloch solver.

    ``dt`` is the step used in control-free spans; ``dt_control`` (if
    smaller) is used inside control windows, where the Rabi oscillation
    sets the fastest timescale.  ``t_start``/``t_end`` bound the
    simulated window in dimensionless time.
    """

    nz: int
    dt: float
    t_start: float
    t_end: float
    dt_control: Optional[float] = None
    snapshot_bytes: int = 64 * 2**20
    store_fields: bool = True

    def __post_init__(self) -> None:
        if self.nz < 2:
            raise ModelError(f"nz must be >= 2, got {self.nz}")
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ModelError(f"dt must be > 0, got {self.dt}")
        if not self.t_end > self.t_start:
            raise ModelError("t_end must exceed t_start")
        if self.dt_control is not None and self.dt_control <= 0.0:
            raise ModelError("dt_control must be > 0")

    @property
    def dt_in_control(self) -> float:
        return self.dt if self.dt_control is None else min(self.dt, self.dt_control)

    def refined(self, factor: int = 2) -> "GridSpec":
        """Grid with nz and 1/dt scaled up by an integer factor."""
        return replace(
            self,
            nz=(self.nz - 1) * factor + 1,
            dt=self.dt / factor,
            dt_control=None if self.dt_control is None else self.dt_control / factor,
        )

    @classmethod
    def auto(cls, medium: MediumParams, probe: PulseSpec,
             schedule:  Optional[ControlSchedule] = None,
             t_start: Optional[float] = None, t_end: Optional[float] = None,
             nz: Optional[int] = None, dt: Optional[float] = None,
             nz_cap: Optional[int] = None, points_per_scale: float = 20.0,
             tail: Optional[float] = None, store_fields: bool = True) -> "GridSpec":
        """Resolution defaults: dt resolves the fastest envelope/decay
        scale by ``points_per_scale`` and nz >= max(200, 20 d).

        ``nz_cap`` allows large-d runs to trade the 20*d default for an
        explicitly chosen ceiling (validated separately by grid-doubling
        convergence checks).
        """
        scales = []
        if isinstance(probe, RisingExponential):
            scales += [probe.t_rise, probe.t_fall]
        elif isinstance(probe, GaussianPulse):
            scales.append(probe.fwhm / 2.0)
        elif isinstance(probe, SquarePulse):
            scales.append(probe.duration / 4.0)
        else:
            t0, t1 = probe.support()
            scales.append((t1 - t0) / 20.0)
        # collective decay time of the polarization
        scales.append(1.0 / (1.0 + medium.d / 4.0))
        dt_free = min(scales) / points_per_scale
        if dt is not None:
            dt_free = dt
        dt_control = None
        if schedule is not None and schedule.peak_rabi() > 0.0:
            dt_control = min(dt_free, 1.0 / schedule.peak_rabi() / points_per_scale)
        if nz is None:
            nz = int(max(200, math.ceil(20.0 * medium.d))) + 1
            if nz_cap is not None:
                nz = min(nz, nz_cap)
        if t_start is None:
            t_start = probe.support()[0]
        if t_end is None:
            last = probe.support()[1]
            if schedule is not None and schedule.read is not None:
                last = max(last, schedule.read_window[1])
            if tail is None:
                tail = max(6.0 / (1.0 + medium.d / 4.0), 1.0)
            t_end = last + tail
        return cls(nz=nz, dt=dt_free, t_start=t_start, t_end=t_end,
                   dt_control=dt_control, store_fields=store_fields)
