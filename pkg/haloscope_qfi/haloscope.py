"""Axion haloscope observables built on the channel-level Fisher information.

A cavity with measurement-port coupling ``gamma_m``, intrinsic loss
``gamma_l`` and axion coupling ``gamma_a`` acts at detuning ``omega`` as the
phase-covariant channel ``(chi_mm2, (1 - chi_mm2) n_T + chi_ma2 n_a)`` on the
probe. Fisher information about ``n_a`` is evaluated at ``n_a = 0``.
"""
import enum
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import constants
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import minimize_scalar

from .exceptions import (
    IncompatibleStrategyError,
    NumericalConvergenceError,
    ParameterDomainError,
)
from .gaussian_core import SourceKind, SourceSpec
from .measurements import (
    fi_bell,
    fi_homodyne_sv,
    fi_homodyne_vacuum,
    fi_photon_counting_vacuum,
    nulled_sv_fi,
    nulled_tmsv_fi,
)
from .qfi_closed_form import (
    qfi_sv,
    qfi_sv_noisy,
    qfi_tmsv,
    qfi_tmsv_noisy,
    qfi_vacuum_limit,
    ub_combined,
    ub_ue,
)
from .utils import cfg, log, parallel_map

NUMERICS = cfg["numerics"]
CAVITY = cfg["cavity"]
OPTIMIZE = cfg["optimize"]


def thermal_occupation(temp, omega_c):
    """Bose-Einstein occupation at angular frequency ``omega_c`` and temperature ``temp`` (K)."""
    if temp < 0 or omega_c <= 0:
        raise ParameterDomainError(f"need temp >= 0 and omega_c > 0, got {temp}, {omega_c}")
    if temp == 0:
        return 0.0
    return float(1.0 / np.expm1(constants.hbar * omega_c / (constants.k * temp)))


@dataclass(frozen=True)
class CavityParams:
    """Coupling rates in rad/s; ``n_t`` overrides the occupation derived from ``temp``."""

    gamma_m: float
    gamma_l: float
    gamma_a: float
    temp: float = CAVITY["temp_mK"] * 1e-3
    omega_c: float = 2.0 * np.pi * CAVITY["fc_GHz"] * 1e9
    n_t_override: float = None

    def __post_init__(self):
        for name in ("gamma_m", "gamma_l", "gamma_a"):
            value = float(getattr(self, name))
            if not value > 0:
                raise ParameterDomainError(f"{name} must be > 0, got {value}")
            object.__setattr__(self, name, value)
        if self.gamma_a > 1e-3 * self.gamma_l:
            log(
                f"gamma_a/gamma_l = {self.gamma_a / self.gamma_l:.3e} is not small; "
                "weak-signal expressions lose accuracy",
                level="warning",
            )
        if self.n_t_override is not None and self.n_t_override < 0:
            raise ParameterDomainError(f"thermal occupation must be >= 0, got {self.n_t_override}")

    @classmethod
    def from_ratios(cls, gm_ratio=None, ga_ratio=None, gamma_l=None, **kwargs):
        gamma_l = CAVITY["gamma_l"] if gamma_l is None else gamma_l
        gm_ratio = CAVITY["gm_ratio"] if gm_ratio is None else gm_ratio
        ga_ratio = CAVITY["ga_ratio"] if ga_ratio is None else ga_ratio
        return cls(gm_ratio * gamma_l, gamma_l, ga_ratio * gamma_l, **kwargs)

    def with_gm_ratio(self, gm_ratio):
        return replace(self, gamma_m=gm_ratio * self.gamma_l)

    @property
    def gamma_loss(self):
        """Intrinsic loss seen by the probe, axion port included."""
        return self.gamma_l + self.gamma_a

    @property
    def gamma_total(self):
        return self.gamma_m + self.gamma_l + self.gamma_a

    @property
    def gm_ratio(self):
        return self.gamma_m / self.gamma_l

    @property
    def ga_ratio(self):
        return self.gamma_a / self.gamma_l

    @property
    def n_t(self):
        if self.n_t_override is not None:
            return float(self.n_t_override)
        return thermal_occupation(self.temp, self.omega_c)


@dataclass(frozen=True)
class AxionSensing:
    omega: float
    chi_mm2: float
    chi_ma2: float
    loss: float
    n_a: float = 0.0

    @property
    def kappa(self):
        return self.chi_mm2

    def n_b(self, n_t):
        return self.loss * n_t + self.chi_ma2 * self.n_a


def sensing_at(omega, cavity, n_a=0.0):
    lorentz = 0.25 * cavity.gamma_total ** 2 + omega * omega
    mismatch = 0.25 * (cavity.gamma_m - cavity.gamma_loss) ** 2 + omega * omega
    return AxionSensing(
        omega=omega,
        chi_mm2=mismatch / lorentz,
        chi_ma2=cavity.gamma_m * cavity.gamma_a / lorentz,
        loss=cavity.gamma_m * cavity.gamma_loss / lorentz,
        n_a=n_a,
    )


def susceptibilities(omega, cavity):
    sensing = sensing_at(omega, cavity)
    return sensing.chi_mm2, sensing.chi_ma2


class Receiver(enum.Enum):
    QFI_LIMIT = "qfi"
    UB = "ub"
    HOMODYNE = "homodyne"
    BELL = "bell"
    NULLING = "nulling"
    PHOTON_COUNTING = "photon-counting"


class Engineering(enum.Enum):
    IDEAL = "ideal"
    PRACTICAL = "practical"

    @classmethod
    def parse(cls, name):
        try:
            return name if isinstance(name, cls) else cls(str(name).lower())
        except ValueError:
            raise ParameterDomainError(f"unknown engineering {name!r}")


_COMPATIBLE = {
    Receiver.QFI_LIMIT: set(SourceKind),
    Receiver.UB: set(SourceKind),
    Receiver.HOMODYNE: {SourceKind.VACUUM, SourceKind.SQUEEZED_VACUUM},
    Receiver.BELL: {SourceKind.TMSV},
    Receiver.NULLING: {SourceKind.SQUEEZED_VACUUM, SourceKind.TMSV},
    Receiver.PHOTON_COUNTING: {SourceKind.VACUUM},
}

STRATEGIES = {
    "vac-hom": (SourceKind.VACUUM, Receiver.HOMODYNE, False),
    "sv-hom": (SourceKind.SQUEEZED_VACUUM, Receiver.HOMODYNE, False),
    "vl": (SourceKind.VACUUM, Receiver.QFI_LIMIT, False),
    "vac-pd": (SourceKind.VACUUM, Receiver.PHOTON_COUNTING, False),
    "sv-qfi": (SourceKind.SQUEEZED_VACUUM, Receiver.QFI_LIMIT, False),
    "tmsv-qfi": (SourceKind.TMSV, Receiver.QFI_LIMIT, False),
    "ub": (SourceKind.TMSV, Receiver.UB, False),
    "ub-combined": (SourceKind.TMSV, Receiver.UB, True),
    "bell": (SourceKind.TMSV, Receiver.BELL, False),
    "sv-null": (SourceKind.SQUEEZED_VACUUM, Receiver.NULLING, False),
    "tmsv-null": (SourceKind.TMSV, Receiver.NULLING, False),
}


@dataclass(frozen=True)
class StrategySpec:
    kind: SourceKind
    receiver: Receiver
    engineering: Engineering = Engineering.IDEAL
    gain: float = 1.0
    combined: bool = False

    def __post_init__(self):
        kind = self.kind if isinstance(self.kind, SourceKind) else SourceKind.parse(self.kind)
        receiver = self.receiver if isinstance(self.receiver, Receiver) else Receiver(self.receiver)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "receiver", receiver)
        object.__setattr__(self, "engineering", Engineering.parse(self.engineering))
        if kind not in _COMPATIBLE[receiver]:
            raise IncompatibleStrategyError(
                f"{receiver.value} receiver cannot read out a {kind.value} source"
            )
        if self.combined and receiver is not Receiver.UB:
            raise IncompatibleStrategyError("only the UB receiver has a combined branch")
        SourceSpec(kind, self.gain)

    @property
    def name(self):
        for name, entry in STRATEGIES.items():
            if entry == (self.kind, self.receiver, self.combined):
                return name
        return f"{self.kind.value}-{self.receiver.value}"

    def source(self, n_t):
        """Probe source; practical engineering leaves it contaminated by ``n_t``."""
        contamination = n_t if self.engineering is Engineering.PRACTICAL else 0.0
        return SourceSpec(self.kind, self.gain, contamination)


def strategy(name, engineering=Engineering.IDEAL, gain=1.0):
    try:
        kind, receiver, combined = STRATEGIES[name]
    except KeyError:
        raise IncompatibleStrategyError(
            f"unknown strategy {name!r}; choose from {', '.join(STRATEGIES)}"
        )
    if kind is SourceKind.VACUUM:
        gain = 1.0
    return StrategySpec(kind, receiver, engineering, gain, combined)


@dataclass(frozen=True)
class ScanRateResult:
    total: float
    method: str
    strategy: str
    gm_ratio: float
    optimum_coupling: float = None
    error: float = 0.0
    flags: tuple = ()

    def __post_init__(self):
        if not np.isfinite(self.total) or self.total < 0:
            raise NumericalConvergenceError(f"invalid total Fisher information {self.total}")


def _channel_fisher(spec, sensing, n_t):
    """Fisher information about the channel noise at one detuning."""
    kappa, n_b = sensing.kappa, sensing.n_b(n_t)
    source = spec.source(n_t)
    receiver, kind = spec.receiver, spec.kind
    practical = spec.engineering is Engineering.PRACTICAL
    if receiver is Receiver.UB:
        bound = ub_combined if spec.combined else ub_ue
        return bound(source.n_s, kappa, n_b)
    if receiver is Receiver.PHOTON_COUNTING:
        return fi_photon_counting_vacuum(n_b, source.n_t, kappa)
    if receiver is Receiver.QFI_LIMIT:
        if kind is SourceKind.VACUUM:
            return qfi_vacuum_limit(kappa * source.n_t + n_b)
        if practical:
            noisy = qfi_sv_noisy if kind is SourceKind.SQUEEZED_VACUUM else qfi_tmsv_noisy
            return noisy(source.gain, source.n_t, kappa, n_b)
        pure = qfi_sv if kind is SourceKind.SQUEEZED_VACUUM else qfi_tmsv
        return pure(source.n_squeeze, kappa, n_b)
    if receiver is Receiver.HOMODYNE:
        if kind is SourceKind.VACUUM:
            return fi_homodyne_vacuum(n_b, source.n_t, kappa)
        return fi_homodyne_sv(source.gain, kappa, n_b, source.n_t)
    if receiver is Receiver.BELL:
        return fi_bell(source.gain, kappa, n_b, source.n_t)
    if kind is SourceKind.SQUEEZED_VACUUM:
        return nulled_sv_fi(source.gain, kappa, n_b, n_t=source.n_t)
    return nulled_tmsv_fi(source.n_squeeze, kappa, n_b, n_t=source.n_t)


def fisher_spectrum(spec, cavity, omega):
    """Fisher information about ``n_a`` at detuning ``omega`` (parameter change by ``chi_ma2**2``)."""
    sensing = sensing_at(omega, cavity)
    result = _channel_fisher(spec, sensing, cavity.n_t)
    return result.scaled(
        sensing.chi_ma2 ** 2, omega=omega, strategy=spec.name, engineering=spec.engineering.value
    )


def total_fisher_quadrature(spec, cavity, epsrel=None, limit=None, kappa_floor=None):
    """``integral d omega`` of the spectrum with ``omega = (gamma/2) tan(u)``.

    The integrand is even; the range stops where ``1 - kappa`` reaches
    ``kappa_floor`` and the remainder is closed with a power-law tail.
    """
    epsrel = NUMERICS["quadrature_epsrel"] if epsrel is None else epsrel
    limit = NUMERICS["quadrature_limit"] if limit is None else limit
    kappa_floor = NUMERICS["quadrature_kappa_floor"] if kappa_floor is None else kappa_floor
    half_width = 0.5 * cavity.gamma_total
    omega_max = np.sqrt(
        max(cavity.gamma_m * cavity.gamma_loss / kappa_floor - half_width ** 2, half_width ** 2)
    )
    u_max = np.arctan(omega_max / half_width)

    def spectrum(omega):
        return fisher_spectrum(spec, cavity, omega).value

    def integrand(u):
        return spectrum(half_width * np.tan(u)) * half_width / np.cos(u) ** 2

    flags = ()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrationWarning)
        body, error = quad(integrand, 0.0, u_max, epsrel=epsrel, epsabs=0.0, limit=limit)
    if caught:
        log(f"quadrature for {spec.name}: {caught[-1].message}", level="warning")
        flags = ("quadrature-warning",)

    edge = spectrum(omega_max)
    slope = np.log(spectrum(1.01 * omega_max) / edge) / np.log(1.01)
    if slope >= -1.0:
        raise NumericalConvergenceError(
            f"spectrum of {spec.name} decays too slowly (exponent {slope:.3f}) to integrate"
        )
    tail = edge * omega_max / (-slope - 1.0)
    total = 2.0 * (body + tail)
    if not np.isfinite(total):
        raise NumericalConvergenceError(f"quadrature for {spec.name} did not converge")
    return ScanRateResult(
        total, "quadrature", spec.name, cavity.gm_ratio, error=2.0 * error, flags=flags
    )


def _ub_total(n_s, cavity):
    ga, gl, gm, n_t = cavity.gamma_a, cavity.gamma_loss, cavity.gamma_m, cavity.n_t
    k = n_s * (2.0 * n_t + 1.0) + n_t + 1.0
    root = 4.0 * gm * n_t * gl + cavity.gamma_total ** 2
    bracket = k * (gl * gl + gm * gm) + 2.0 * gl * gm * (2.0 * n_t + 1.0) * (n_s * n_t + n_t + 1.0)
    return 2.0 * np.pi * ga ** 2 * gm * bracket / (n_t * (n_t + 1.0) * gl * root ** 1.5)


def _ideal_closed(spec, cavity):
    ga, gl, gm, n_t = cavity.gamma_a, cavity.gamma_loss, cavity.gamma_m, cavity.n_t
    gamma2 = cavity.gamma_total ** 2
    gain = spec.gain
    n_s = spec.source(n_t).n_squeeze
    if spec.receiver is Receiver.UB and not spec.combined:
        return _ub_total(n_s, cavity)
    if spec.kind is SourceKind.VACUUM and spec.receiver in (
        Receiver.QFI_LIMIT,
        Receiver.PHOTON_COUNTING,
    ):
        return 2.0 * np.pi * ga ** 2 * gm / (n_t * gl * np.sqrt(4.0 * gm * n_t * gl + gamma2))
    if spec.receiver is Receiver.HOMODYNE and spec.kind is SourceKind.VACUUM:
        return 8.0 * np.pi * ga ** 2 * gm ** 2 / (8.0 * gm * n_t * gl + gamma2) ** 1.5
    if spec.receiver is Receiver.HOMODYNE:
        nu = 2.0 * n_t + 1.0
        denominator = gl * gl + gm * gm + 2.0 * gl * gm * (2.0 * gain * nu - 1.0)
        return 8.0 * np.pi * gain ** 2 * ga ** 2 * gm ** 2 / denominator ** 1.5
    if spec.receiver is Receiver.QFI_LIMIT and spec.kind is SourceKind.TMSV:
        nu = 2.0 * n_t + 1.0
        k = n_s * nu + n_t + 1.0
        root = np.sqrt(gl * gl + gm * gm + 2.0 * gl * gm * nu * (2.0 * n_s + 1.0))
        return 2.0 * np.pi * ga ** 2 * gm * k / (n_t * (n_t + 1.0) * gl * root)
    return None


def _practical_tmsv_total(gain, cavity):
    ga, gl, gm, n_t = cavity.gamma_a, cavity.gamma_loss, cavity.gamma_m, cavity.n_t
    g, nu = gain, 2.0 * n_t + 1.0
    cross, square = gl * gm, gl * gl + gm * gm
    first = n_t ** 2.5 * (g * g * nu - 2.0 * g + 2.0 * n_t + 1.0) ** 2 * np.sqrt(
        g / (cross * ((g * g + 1.0) * nu - 2.0 * g * (n_t + 1.0)) + g * square * n_t)
    )
    second = (n_t + 1.0) ** 2.5 * ((g * g + 1.0) * nu + 2.0 * g) ** 2 * np.sqrt(
        g / (cross * ((g * g + 1.0) * nu - 2.0 * g * n_t) + g * square * (n_t + 1.0))
    )
    spread = 2.0 * n_t * n_t + 2.0 * n_t + 1.0
    third = (g + 1.0) ** 2 * nu * (nu * nu * (g * g + 1.0) + 2.0 * g) * np.sqrt(
        g * spread
        / (cross * (nu * nu * (g * g + 1.0) - 4.0 * g * n_t * (n_t + 1.0)) + g * square * spread)
    )
    prefactor = -np.pi * ga ** 2 * gm / (
        2.0 * (g - 1.0) ** 2 * g * gl * n_t ** 2 * (n_t + 1.0) ** 2 * nu
    )
    return prefactor * (first - second + third)


def _practical_closed(spec, cavity):
    ga, gl, gm, n_t = cavity.gamma_a, cavity.gamma_loss, cavity.gamma_m, cavity.n_t
    gamma3 = cavity.gamma_total ** 3
    nu = 2.0 * n_t + 1.0
    if spec.receiver is Receiver.UB and not spec.combined:
        return _ub_total(spec.source(n_t).n_s, cavity)
    if spec.kind is SourceKind.VACUUM and spec.receiver in (
        Receiver.QFI_LIMIT,
        Receiver.PHOTON_COUNTING,
    ):
        return 4.0 * np.pi * ga ** 2 * gm ** 2 / (n_t * (n_t + 1.0) * gamma3)
    if spec.receiver is Receiver.HOMODYNE and spec.kind is SourceKind.VACUUM:
        return 8.0 * np.pi * ga ** 2 * gm ** 2 / (nu * nu * gamma3)
    if spec.receiver is Receiver.HOMODYNE:
        g = spec.gain
        denominator = 2.0 * (2.0 * g - 1.0) * gl * gm + gl * gl + gm * gm
        return 8.0 * np.pi * g * g * ga ** 2 * gm ** 2 / (nu * nu * denominator ** 1.5)
    if spec.receiver is Receiver.QFI_LIMIT and spec.kind is SourceKind.TMSV and spec.gain > 1.0:
        return _practical_tmsv_total(spec.gain, cavity)
    return None


def total_fisher_closed(spec, cavity):
    """Closed-form total where one exists, otherwise quadrature tagged as such."""
    if cavity.n_t <= 0:
        raise ParameterDomainError("closed-form totals need n_T > 0")
    closed = _ideal_closed if spec.engineering is Engineering.IDEAL else _practical_closed
    value = closed(spec, cavity)
    if value is None:
        log(f"no closed-form total for {spec.name} ({spec.engineering.value}); integrating", level="debug")
        return total_fisher_quadrature(spec, cavity)
    return ScanRateResult(float(value), "closed-form", spec.name, cavity.gm_ratio)


def overcoupling_limit(spec, cavity):
    """Total Fisher information as ``gamma_m / gamma_l -> inf``."""
    ga, gl, n_t = cavity.gamma_a, cavity.gamma_loss, cavity.n_t
    source = spec.source(n_t)
    ideal = spec.engineering is Engineering.IDEAL
    if spec.receiver is Receiver.UB and not spec.combined or (
        ideal and spec.receiver is Receiver.QFI_LIMIT and spec.kind is SourceKind.TMSV
    ):
        n_s = source.n_s
        k = 1.0 + n_t + n_s * (1.0 + 2.0 * n_t)
        return 2.0 * np.pi * ga ** 2 * k / (gl * n_t * (1.0 + n_t))
    if ideal and spec.receiver is Receiver.QFI_LIMIT and spec.kind is SourceKind.SQUEEZED_VACUUM:
        n_s = source.n_squeeze
        return 2.0 * np.pi * ga ** 2 * (1.0 + 2.0 * n_s) ** 2 / (gl * (n_s + n_t + 2.0 * n_s * n_t))
    if ideal and spec.kind is SourceKind.VACUUM and spec.receiver in (
        Receiver.QFI_LIMIT,
        Receiver.PHOTON_COUNTING,
    ):
        return 2.0 * np.pi * ga ** 2 / (n_t * gl)
    raise IncompatibleStrategyError(
        f"no over-coupling closed form for {spec.name} ({spec.engineering.value})"
    )


def practical_tmsv_optimum(gain, cavity):
    """Large-gain, cold-cavity maximum of the practical TMSV total, reached near ``gm_ratio = G/2``."""
    return 2.0 * np.pi * cavity.gamma_a ** 2 * gain / (cavity.gamma_loss * 12.0 * np.sqrt(3.0) * cavity.n_t)


def _sign_changes(values):
    signs = np.sign(np.diff(values))
    signs = signs[signs != 0]
    return int(np.count_nonzero(np.diff(signs)))


def optimize_coupling(spec, cavity, gm_range=None, grid_points=None, dense_points=None, threads=1):
    """Maximize the total Fisher information over ``gm_ratio`` on a log grid."""
    lo, hi = OPTIMIZE["gm_range"] if gm_range is None else gm_range
    grid_points = OPTIMIZE["grid_points"] if grid_points is None else grid_points
    dense_points = OPTIMIZE["dense_points"] if dense_points is None else dense_points
    if not 0 < lo < hi:
        raise ParameterDomainError(f"coupling range must satisfy 0 < lo < hi, got {(lo, hi)}")

    def total(log_ratio):
        return total_fisher_closed(spec, cavity.with_gm_ratio(10.0 ** log_ratio)).total

    grid = np.linspace(np.log10(lo), np.log10(hi), grid_points)
    values = np.array(parallel_map(total, grid, threads))
    flags = ()
    if _sign_changes(values) > 1:
        log(f"{spec.name}: total Fisher information is not unimodal; scanning densely", level="info")
        grid = np.linspace(np.log10(lo), np.log10(hi), dense_points)
        values = np.array(parallel_map(total, grid, threads))
        flags = ("dense-scan",)
    best = int(np.argmax(values))
    if best in (0, grid.size - 1):
        log(f"{spec.name}: optimum sits on the coupling range edge {10.0 ** grid[best]:.4g}", level="info")
        x_best, y_best = grid[best], values[best]
        flags += ("boundary",)
    else:
        result = minimize_scalar(
            lambda x: -total(x),
            bounds=(grid[best - 1], grid[best + 1]),
            method="bounded",
            options=dict(xatol=1e-8),
        )
        x_best, y_best = float(result.x), -float(result.fun)
        if y_best < values[best]:
            x_best, y_best = grid[best], values[best]
    optimum = 10.0 ** x_best
    method = total_fisher_closed(spec, cavity.with_gm_ratio(optimum)).method
    return ScanRateResult(
        float(y_best), method, spec.name, optimum, optimum_coupling=optimum, flags=flags
    )
