"""Exact single-excitation dynamics over a discrete structured reservoir.

A single excitation shared between an upper cavity mode and f reservoir
classes at frequencies omega_l, all coupled with the same lumped
amplitude g_c.  In the interaction picture the amplitudes obey

    dc0/dt  = +i g_c       sum_l exp(+i omega_l t) c_l
    dc_l/dt = +i conj(g_c) exp(-i omega_l t) c0

which conserves the norm |c0|^2 + sum |c_l|^2 exactly.  The reservoir
response kernel is g(t) = |g_c|^2 sum_l exp(i omega_l t); for a dense
equidistant comb of half-width eps_max it acts as a delta function and
the survival decays at the golden-rule rate

    gamma = pi * f * |g_c|^2 / eps_max

valid before the comb recurrence at t_rec = pi * f / eps_max.

The module also implements repeated projective reservoir measurements
(decay freezing for short measurement periods on a flat spectrum, decay
acceleration for a spectrum detuned from the system) and the two-upper-
mode interference configuration with its exactly dark antisymmetric
state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._integrate import rk4_step, steps_for
from .errors import ConfigurationError, InvalidInput

__all__ = [
    "ReservoirSpec",
    "SingleExcitationState",
    "TwoUpperModeState",
    "DecayTrajectory",
    "ZenoResult",
    "response_function",
    "equidistant_response_closed_form",
    "markov_rate",
    "coupling_for_rate",
    "recurrence_time",
    "evolve_exact",
    "fit_decay_rate",
    "zeno_evolve",
    "zeno_scan",
    "interference_evolve",
]

SPECTRA = ("equidistant", "lorentzian", "custom")


@dataclass(frozen=True)
class ReservoirSpec:
    """f spectral classes, half-width eps_max, one lumped coupling.

    spectrum:
      equidistant  omega_l = eps_max * (2l - 1 - f) / f, l = 1..f
      lorentzian   f frequencies at equal quantile spacing of a
                   Lorentzian(center, width) truncated to
                   [-eps_max, eps_max]; deterministic, no randomness
      custom       explicit frequency list (uniform coupling still)
    """

    f: int
    eps_max: float
    coupling: complex
    spectrum: str = "equidistant"
    center: Optional[float] = None
    width: Optional[float] = None
    omegas: Optional[tuple] = None

    def __post_init__(self):
        if self.f < 1:
            raise InvalidInput(f"need at least one spectral class, got f={self.f}")
        if self.eps_max <= 0:
            raise InvalidInput(f"eps_max must be positive, got {self.eps_max}")
        if self.spectrum not in SPECTRA:
            raise InvalidInput(f"unknown spectrum {self.spectrum!r}, expected one of {SPECTRA}")
        if self.spectrum == "lorentzian":
            if self.center is None or self.width is None:
                raise InvalidInput("lorentzian spectrum needs center and width")
            if self.width <= 0:
                raise InvalidInput("lorentzian width must be positive")
        if self.spectrum == "custom":
            if self.omegas is None or len(self.omegas) != self.f:
                raise InvalidInput("custom spectrum needs exactly f frequencies")
            object.__setattr__(self, "omegas", tuple(float(w) for w in self.omegas))

    def frequencies(self) -> np.ndarray:
        if self.spectrum == "equidistant":
            l = np.arange(1, self.f + 1, dtype=float)
            return self.eps_max * (2.0 * l - 1.0 - self.f) / self.f
        if self.spectrum == "lorentzian":
            lo = np.arctan((-self.eps_max - self.center) / self.width)
            hi = np.arctan((self.eps_max - self.center) / self.width)
            quant = (np.arange(self.f) + 0.5) / self.f
            return self.center + self.width * np.tan(lo + quant * (hi - lo))
        return np.asarray(self.omegas, dtype=float)

    @property
    def coupling_sq(self) -> float:
        return float(abs(self.coupling) ** 2)


@dataclass
class SingleExcitationState:
    """Amplitudes of (excitation in the upper mode) and (one reservoir
    excitation in class l), at absolute time t."""

    c0: complex
    c: np.ndarray
    t: float = 0.0

    @classmethod
    def excited(cls, f: int) -> "SingleExcitationState":
        return cls(1.0 + 0.0j, np.zeros(f, dtype=complex), 0.0)

    def norm_sq(self) -> float:
        return float(abs(self.c0) ** 2 + np.sum(np.abs(self.c) ** 2))


@dataclass
class TwoUpperModeState:
    """Two upper modes sharing one reservoir channel."""

    c0: complex
    c0p: complex
    c: np.ndarray
    t: float = 0.0

    @classmethod
    def symmetric(cls, f: int) -> "TwoUpperModeState":
        s = 1.0 / np.sqrt(2.0)
        return cls(s, s, np.zeros(f, dtype=complex), 0.0)

    @classmethod
    def antisymmetric(cls, f: int) -> "TwoUpperModeState":
        s = 1.0 / np.sqrt(2.0)
        return cls(s, -s, np.zeros(f, dtype=complex), 0.0)

    @classmethod
    def single(cls, f: int) -> "TwoUpperModeState":
        return cls(1.0 + 0.0j, 0.0 + 0.0j, np.zeros(f, dtype=complex), 0.0)

    def norm_sq(self) -> float:
        return float(abs(self.c0) ** 2 + abs(self.c0p) ** 2 + np.sum(np.abs(self.c) ** 2))


@dataclass
class DecayTrajectory:
    times: np.ndarray
    survival: np.ndarray
    snapshots: list


@dataclass
class InterferenceTrajectory:
    times: np.ndarray
    c0: np.ndarray
    c0p: np.ndarray

    @property
    def survival(self) -> np.ndarray:
        return np.abs(self.c0) ** 2 + np.abs(self.c0p) ** 2


@dataclass
class ZenoResult:
    tau_m: float
    times: np.ndarray
    survival: np.ndarray
    gamma_eff: float
    fit_residual: float


def response_function(spec: ReservoirSpec, t) -> np.ndarray:
    """Reservoir response kernel g(t) by direct summation over classes."""
    om = spec.frequencies()
    tt = np.asarray(t, dtype=float)
    g = spec.coupling_sq * np.sum(np.exp(1j * np.outer(tt, om)), axis=1)
    return g if tt.ndim else complex(g[0])


def equidistant_response_closed_form(spec: ReservoirSpec, t) -> np.ndarray:
    """g(t) for the equidistant comb: |g_c|^2 sin(e t) / sin(e t / f)."""
    if spec.spectrum != "equidistant":
        raise ConfigurationError("closed form only holds for the equidistant spectrum")
    tt = np.asarray(t, dtype=float)
    x = spec.eps_max * tt
    num = np.sin(x)
    den = np.sin(x / spec.f)
    small = np.abs(den) < 1e-12
    safe = np.where(small, 1.0, den)
    ratio = np.where(small, spec.f * np.cos(x) / np.cos(x / spec.f), num / safe)
    g = spec.coupling_sq * ratio
    return g if tt.ndim else complex(g)


def markov_rate(spec: ReservoirSpec) -> float:
    """Golden-rule decay rate pi * f * |g_c|^2 / eps_max (equidistant comb)."""
    if spec.spectrum != "equidistant":
        raise ConfigurationError(
            "markov_rate is derived for the equidistant spectrum; "
            "fit the rate from an exact trajectory instead (fit_decay_rate)"
        )
    return float(np.pi * spec.f * spec.coupling_sq / spec.eps_max)


def coupling_for_rate(f: int, eps_max: float, gamma: float) -> float:
    """Coupling amplitude that makes markov_rate equal gamma."""
    if gamma <= 0:
        raise InvalidInput(f"rate must be positive, got {gamma}")
    return float(np.sqrt(gamma * eps_max / (np.pi * f)))


def recurrence_time(spec: ReservoirSpec) -> float:
    """Comb rephasing time pi * f / eps_max (equidistant)."""
    if spec.spectrum != "equidistant":
        raise ConfigurationError("recurrence time is defined for the equidistant comb")
    return float(np.pi * spec.f / spec.eps_max)


def _default_dt(spec: ReservoirSpec) -> float:
    return 0.02 / spec.eps_max


def _check_dt(spec: ReservoirSpec, dt: float) -> None:
    if dt > 0.05 / spec.eps_max + 1e-15:
        raise ConfigurationError(
            f"dt={dt:.3g} does not resolve the fastest reservoir phase; "
            f"need dt <= 0.05/eps_max = {0.05 / spec.eps_max:.3g}"
        )


def _single_excitation_rhs(spec: ReservoirSpec):
    om = spec.frequencies()
    g = complex(spec.coupling)
    gc = np.conj(g)

    def rhs(t, y):
        out = np.empty_like(y)
        ph = np.exp(1j * om * t)
        out[0] = 1j * g * np.dot(ph, y[1:])
        out[1:] = (1j * gc * y[0]) * ph.conj()
        return out

    return rhs


def evolve_exact(
    spec: ReservoirSpec,
    state0: Optional[SingleExcitationState] = None,
    t_final: float = 1.0,
    dt: Optional[float] = None,
    snapshot_stride: int = 0,
) -> DecayTrajectory:
    """Integrate the single-excitation amplitudes with RK4.

    Survival |c0(t)|^2 is recorded at every step; reservoir amplitude
    snapshots every ``snapshot_stride`` steps when the stride is > 0.
    """
    if dt is None:
        dt = _default_dt(spec)
    _check_dt(spec, dt)
    if state0 is None:
        state0 = SingleExcitationState.excited(spec.f)
    if state0.c.size != spec.f:
        raise InvalidInput("state has a different number of reservoir classes than the spec")

    rhs = _single_excitation_rhs(spec)
    nsteps, dt = steps_for(t_final, dt)
    y = np.concatenate(([state0.c0], state0.c)).astype(complex)
    t0 = state0.t
    times = np.empty(nsteps + 1)
    survival = np.empty(nsteps + 1)
    times[0] = t0
    survival[0] = abs(y[0]) ** 2
    snapshots = []
    for step in range(1, nsteps + 1):
        y = rk4_step(rhs, t0 + (step - 1) * dt, y, dt)
        times[step] = t0 + step * dt
        survival[step] = abs(y[0]) ** 2
        if snapshot_stride and (step % snapshot_stride == 0 or step == nsteps):
            snapshots.append((times[step], complex(y[0]), y[1:].copy()))
    return DecayTrajectory(times=times, survival=survival, snapshots=snapshots)


def fit_decay_rate(
    times: np.ndarray, survival: np.ndarray, window: tuple[float, float]
) -> tuple[float, float]:
    """Least-squares exponential fit of a survival curve on a window.

    Returns (rate estimate, max relative residual of the fit).  Rejects
    windows that contain non-positive survival or fewer than two points.
    """
    times = np.asarray(times, dtype=float)
    survival = np.asarray(survival, dtype=float)
    t_a, t_b = window
    mask = (times >= t_a - 1e-12) & (times <= t_b + 1e-12)
    if np.count_nonzero(mask) < 2:
        raise InvalidInput(f"fit window [{t_a}, {t_b}] contains fewer than two samples")
    t = times[mask]
    s = survival[mask]
    if np.any(s <= 0):
        raise InvalidInput("fit window contains zero or negative survival")
    slope, intercept = np.polyfit(t, np.log(s), 1)
    fit = np.exp(intercept + slope * t)
    residual = float(np.max(np.abs(s / fit - 1.0)))
    return float(-slope), residual


def zeno_evolve(
    spec: ReservoirSpec,
    state0: Optional[SingleExcitationState] = None,
    t_final: float = 1.0,
    tau_m: float = 0.1,
    dt: Optional[float] = None,
) -> ZenoResult:
    """Free evolution interrupted by projective reservoir measurements.

    Every tau_m the reservoir is measured; conditioned on the
    no-excitation outcome the reservoir amplitudes are reset and the
    cumulative no-decay probability is multiplied by |c0|^2 / norm.
    The effective rate is the exponential fit of the cumulative curve.
    """
    if dt is None:
        dt = _default_dt(spec)
    if tau_m < dt:
        # a segment must contain at least one step
        dt = tau_m
    _check_dt(spec, dt)
    n_meas = int(np.floor(t_final / tau_m + 1e-9))
    if n_meas < 10:
        raise ConfigurationError(
            f"need at least 10 measurements, got t_final/tau_m = {t_final / tau_m:.2f}"
        )
    state = state0 if state0 is not None else SingleExcitationState.excited(spec.f)
    if state.c.size != spec.f:
        raise InvalidInput("state has a different number of reservoir classes than the spec")

    times = np.empty(n_meas + 1)
    cumulative = np.empty(n_meas + 1)
    times[0] = state.t
    cumulative[0] = 1.0
    s_cum = 1.0
    for k in range(1, n_meas + 1):
        state = _segment_end_state(spec, state, tau_m, dt)
        norm = state.norm_sq()
        p_no = abs(state.c0) ** 2 / norm
        s_cum *= p_no
        mag = abs(state.c0)
        phase = state.c0 / mag if mag > 0 else 1.0 + 0.0j
        state = SingleExcitationState(phase, np.zeros(spec.f, dtype=complex), state.t)
        times[k] = times[0] + k * tau_m
        cumulative[k] = s_cum

    gamma_eff, residual = fit_decay_rate(times, cumulative, (times[0], times[-1]))
    return ZenoResult(
        tau_m=tau_m,
        times=times,
        survival=cumulative,
        gamma_eff=max(gamma_eff, 0.0),
        fit_residual=residual,
    )


def _segment_end_state(
    spec: ReservoirSpec, state: SingleExcitationState, tau: float, dt: float
) -> SingleExcitationState:
    rhs = _single_excitation_rhs(spec)
    nsteps, h = steps_for(tau, dt)
    y = np.concatenate(([state.c0], state.c)).astype(complex)
    t = state.t
    for _ in range(nsteps):
        y = rk4_step(rhs, t, y, h)
        t += h
    return SingleExcitationState(complex(y[0]), y[1:].copy(), state.t + tau)


def zeno_scan(
    spec: ReservoirSpec,
    taus: Sequence[float],
    n_measurements: int = 60,
    dt: Optional[float] = None,
) -> list[ZenoResult]:
    """Effective decay rate for a list of measurement periods."""
    if n_measurements < 10:
        raise ConfigurationError("need at least 10 measurements per period")
    out = []
    for tau in taus:
        out.append(
            zeno_evolve(spec, None, t_final=n_measurements * tau, tau_m=tau, dt=dt)
        )
    return out


def interference_evolve(
    spec: ReservoirSpec,
    state0: TwoUpperModeState,
    t_final: float,
    dt: Optional[float] = None,
) -> InterferenceTrajectory:
    """Two upper modes coupled to the same reservoir channel.

    Each reservoir class is driven by the sum of the two upper
    amplitudes, so the antisymmetric combination decouples exactly and
    the symmetric one decays twice as fast as a single mode.
    """
    if dt is None:
        dt = _default_dt(spec)
    _check_dt(spec, dt)
    if state0.c.size != spec.f:
        raise InvalidInput("state has a different number of reservoir classes than the spec")

    om = spec.frequencies()
    g = complex(spec.coupling)
    gc = np.conj(g)

    def rhs(t, y):
        out = np.empty_like(y)
        ph = np.exp(1j * om * t)
        drive = 1j * g * np.dot(ph, y[2:])
        out[0] = drive
        out[1] = drive
        out[2:] = (1j * gc * (y[0] + y[1])) * ph.conj()
        return out

    nsteps, dt = steps_for(t_final, dt)
    y = np.concatenate(([state0.c0, state0.c0p], state0.c)).astype(complex)
    t0 = state0.t
    times = np.empty(nsteps + 1)
    c0s = np.empty(nsteps + 1, dtype=complex)
    c0ps = np.empty(nsteps + 1, dtype=complex)
    times[0], c0s[0], c0ps[0] = t0, y[0], y[1]
    for step in range(1, nsteps + 1):
        y = rk4_step(rhs, t0 + (step - 1) * dt, y, dt)
        times[step] = t0 + step * dt
        c0s[step] = y[0]
        c0ps[step] = y[1]
    return InterferenceTrajectory(times=times, c0=c0s, c0p=c0ps)
