"""Closed-form quantum Fisher information about the added noise ``n_b``.

All values are per probe mode and in units of ``1/n_b**2``.
"""
import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from .exceptions import NumericalConvergenceError, ParameterDomainError
from .gaussian_core import (
    ChannelParams,
    SourceKind,
    SourceSpec,
    apply_channel,
    make_source,
)
from .utils import cfg, log

NUMERICS = cfg["numerics"]


class Method(enum.Enum):
    UB_UE = "ub-ue"
    UB_TP = "ub-tp"
    UB_COMBINED = "ub-combined"
    UB_COMPOUND = "ub-compound"
    VACUUM_LIMIT = "vacuum-limit"
    SV = "sv"
    TMSV = "tmsv"
    SV_NOISY = "sv-noisy"
    TMSV_NOISY = "tmsv-noisy"
    GAUSSIAN = "gaussian"
    OVERLAP = "overlap"
    FOCK_ORACLE = "fock-oracle"
    HOMODYNE_VACUUM = "homodyne-vacuum"
    HOMODYNE_SV = "homodyne-sv"
    BELL = "bell"
    PHOTON_COUNTING = "photon-counting"
    DISTRIBUTION = "distribution"


@dataclass(frozen=True)
class FisherResult:
    value: float
    method: Method
    params: dict = field(default_factory=dict)
    error: float = 0.0
    flags: tuple = ()

    def __post_init__(self):
        value = float(self.value)
        if not np.isfinite(value):
            raise NumericalConvergenceError(
                f"{self.method.value} Fisher information is not finite for {self.params}"
            )
        if value < 0:
            raise NumericalConvergenceError(
                f"{self.method.value} Fisher information is negative ({value}) for {self.params}"
            )
        object.__setattr__(self, "value", value)

    def __float__(self):
        return self.value

    def scaled(self, factor, **params):
        """Parameter-change rule: multiply by ``(d n_b / d theta)**2``."""
        return replace(
            self,
            value=self.value * factor,
            error=self.error * factor,
            params={**self.params, **params},
        )


def _check_domain(kappa, n_b, guard=None):
    guard = NUMERICS["singular_guard"] if guard is None else guard
    ChannelParams(kappa, n_b)
    if n_b <= 0:
        raise ParameterDomainError("Fisher information about n_b diverges at n_b = 0")
    # n_b - kappa + 1 >= n_b below unit transmissivity
    if kappa > 1.0 and n_b - kappa + 1.0 < guard * n_b:
        raise ParameterDomainError(
            f"near-singular denominator n_b - kappa + 1 = {n_b - kappa + 1.0}"
        )


def _check_photons(n_s):
    if n_s < 0 or not np.isfinite(n_s):
        raise ParameterDomainError(f"signal photon number must be >= 0, got {n_s}")


def ub_ue(n_s, kappa, n_b):
    """Energy-constrained bound from a unitary extension of the channel."""
    _check_photons(n_s)
    _check_domain(kappa, n_b)
    value = 1.0 / (n_b * (n_b + 1.0)) + kappa * n_s * (2.0 * n_b - kappa + 1.0) / (
        n_b * (n_b + 1.0) ** 2 * (n_b - kappa + 1.0)
    )
    return FisherResult(value, Method.UB_UE, dict(n_s=n_s, kappa=kappa, n_b=n_b))


def ub_tp(kappa, n_b):
    """Energy-independent bound from teleportation stretching."""
    _check_domain(kappa, n_b)
    value = 1.0 / (n_b * (n_b + 1.0 - kappa))
    return FisherResult(value, Method.UB_TP, dict(kappa=kappa, n_b=n_b))


def ub_combined(n_s, kappa, n_b):
    ue, tp = ub_ue(n_s, kappa, n_b), ub_tp(kappa, n_b)
    best = ue if ue.value <= tp.value else tp
    return FisherResult(
        best.value,
        Method.UB_COMBINED,
        dict(n_s=n_s, kappa=kappa, n_b=n_b, branch=best.method.value),
    )


@dataclass(frozen=True)
class CompoundElement:
    kappa: float
    n_b: Callable[[float], float]
    n_s: float
    dn_b: Optional[Callable[[float], float]] = None


@dataclass(frozen=True)
class CompoundChannelSpec:
    """Product of channels whose noises all depend on one parameter ``theta``."""

    elements: Sequence[CompoundElement]
    theta: float


def _central_derivative(func, x):
    h = 1e-5 * max(abs(x), 1.0)
    return (func(x + h) - func(x - h)) / (2.0 * h)


def ub_compound(spec):
    total = 0.0
    for element in spec.elements:
        n_b = element.n_b(spec.theta)
        if element.dn_b is not None:
            slope = element.dn_b(spec.theta)
        else:
            slope = _central_derivative(element.n_b, spec.theta)
        total += slope ** 2 * ub_ue(element.n_s, element.kappa, n_b).value
    return FisherResult(
        total,
        Method.UB_COMPOUND,
        dict(theta=spec.theta, n_elements=len(spec.elements)),
    )


def qfi_vacuum_limit(n_b):
    """Vacuum probe; also the photon-counting Fisher information of a thermal state."""
    if n_b <= 0:
        raise ParameterDomainError("Fisher information about n_b diverges at n_b = 0")
    return FisherResult(1.0 / (n_b * (n_b + 1.0)), Method.VACUUM_LIMIT, dict(n_b=n_b))


def qfi_sv(n_s, kappa, n_b):
    _check_photons(n_s)
    _check_domain(kappa, n_b)
    kn = kappa * n_s
    numerator = (n_b + 1.0) ** 2 + (n_b + 2.0 * kn) ** 2 + 2.0 * kn * (kappa + 1.0)
    first = kn * (2.0 * n_b - kappa + 1.0) + n_b * (n_b + 1.0)
    second = 2.0 * n_b * (n_b + 2.0 * kn + 1.0) - 2.0 * (kappa - 1.0) * kn + 1.0
    # both factors carry the scale of n_b; only a vanishing one is degenerate
    if not (first > 0.0 and second > 0.0):
        raise ParameterDomainError(
            f"degenerate squeezed-vacuum denominator ({first}, {second}) "
            f"at n_s={n_s}, kappa={kappa}, n_b={n_b}"
        )
    return FisherResult(
        numerator / (first * second), Method.SV, dict(n_s=n_s, kappa=kappa, n_b=n_b)
    )


def sv_large_n_limit(kappa, n_b):
    """Squeezed-vacuum QFI as ``n_s -> inf`` for ``kappa < 1``."""
    return 2.0 / (1.0 - kappa + 2.0 * n_b) ** 2


def qfi_tmsv(n_s, kappa, n_b):
    _check_photons(n_s)
    _check_domain(kappa, n_b)
    a = 2.0 * n_b - kappa + 1.0
    value = (a * n_s + n_b - kappa + 1.0) / (
        n_b * (n_b - kappa + 1.0) * (a * n_s + n_b + 1.0)
    )
    return FisherResult(value, Method.TMSV, dict(n_s=n_s, kappa=kappa, n_b=n_b))


def tmsv_vacuum_ratio(n_s, kappa, n_b):
    """Advantage of the two-mode squeezed probe over the vacuum limit, always >= 1."""
    _check_domain(kappa, n_b)
    a = 2.0 * n_b + 1.0 - kappa
    return 1.0 + kappa * n_s * a / ((n_b + 1.0 - kappa) * (a * n_s + n_b + 1.0))


def qfi_sv_noisy(gain, n_t, kappa, n_b):
    """Squeezed thermal probe; output covariance ``diag(w1, w2)``."""
    _check_domain(kappa, n_b)
    source = SourceSpec(SourceKind.SQUEEZED_VACUUM, gain, n_t)
    mu = 4.0 * n_b + 2.0 * (1.0 - kappa)
    # variances with vacuum normalized to 1
    kn, u = kappa * source.nu, 0.5 * mu
    s1 = kn * gain + u
    s2 = kn / gain + u
    det = s1 * s2
    excess = 2.0 * (kappa * n_t + n_b) * (kn + u + 1.0) + kn * u * (gain - 1.0) ** 2 / gain
    if not excess > 0.0:
        raise ParameterDomainError("pure channel output: Fisher information diverges")
    value = 2.0 * (s1 * s1 + s2 * s2) / (det * (det + 1.0)) + 2.0 * (s1 + s2) ** 2 / (
        det * excess * (det + 1.0)
    )
    return FisherResult(
        value, Method.SV_NOISY, dict(gain=gain, n_t=n_t, kappa=kappa, n_b=n_b)
    )


def qfi_tmsv_noisy(gain, n_t, kappa, n_b):
    """Two-mode squeezed thermal probe, channel on the signal arm only."""
    _check_domain(kappa, n_b)
    source = SourceSpec(SourceKind.TMSV, gain, n_t)
    nu, eps = source.nu, 1.0 - kappa
    m = n_b + 0.5 * eps
    b = nu * (gain * gain + 1.0) / (4.0 * gain)
    a = kappa * b + m
    c2 = kappa * (b * b - 0.25 * nu * nu)
    delta = np.sqrt(eps * eps * b * b + 2.0 * (2.0 - eps) * b * m + m * m + kappa * nu * nu)
    d1_excess = (2.0 * n_b * (2.0 * b + 1.0) + kappa * (nu * nu - 1.0)) / (
        2.0 * (delta + eps * b - m + 1.0)
    )
    d2_excess = (2.0 * (2.0 * b - 1.0) * (n_b + eps) + kappa * (nu * nu - 1.0)) / (
        2.0 * (delta + 1.0 - eps * b + m)
    )
    d1, d2 = 0.5 + d1_excess, 0.5 + d2_excess
    if d1_excess <= 0 or d2_excess <= 0:
        raise ParameterDomainError("pure channel output: Fisher information diverges")
    s2 = 4.0 * c2 / ((a + b + delta) * 2.0 * delta)
    c2_weight = 1.0 + s2
    value = (
        c2_weight ** 2 / (d1_excess * (d1 + 0.5))
        + s2 ** 2 / (d2_excess * (d2 + 0.5))
        + 2.0 * c2_weight * s2 / (d1 * d2 + 0.25)
    )
    return FisherResult(
        value, Method.TMSV_NOISY, dict(gain=gain, n_t=n_t, kappa=kappa, n_b=n_b)
    )


def annihilation_covariance(cov):
    """``Sigma = T V T^T`` with ``T = [[1, i], [1, -i]] / sqrt(2)`` per mode."""
    n_modes = cov.shape[0] // 2
    t = np.kron(np.eye(n_modes), np.array([[1.0, 1.0j], [1.0, -1.0j]]) / np.sqrt(2.0))
    return t @ cov @ t.T


def qfi_gaussian(cov, dcov, rcond=None):
    """QFI of a zero-mean Gaussian family from its covariance and derivative."""
    rcond = NUMERICS["pinv_rcond"] if rcond is None else rcond
    cov, dcov = np.asarray(cov, dtype=float), np.asarray(dcov, dtype=float)
    n_modes = cov.shape[0] // 2
    sigma = annihilation_covariance(cov)
    dsigma = annihilation_covariance(dcov)
    omega = np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    big_r = np.kron(sigma, sigma) + 0.25 * np.kron(omega, omega)
    vec = dsigma.reshape(-1)
    flags = ()
    singular_values = scipy.linalg.svdvals(big_r)
    if singular_values.min() > rcond * singular_values.max():
        solved = scipy.linalg.solve(big_r, vec)
    else:
        log(
            f"Gaussian QFI: ill-conditioned R (min singular value "
            f"{singular_values.min():.3e}); using pseudo-inverse",
            level="warning",
        )
        solved = scipy.linalg.pinv(big_r, atol=0.0, rtol=rcond) @ vec
        flags = ("pseudo-inverse",)
    value = 0.5 * np.real(np.vdot(vec, solved))
    return FisherResult(value, Method.GAUSSIAN, dict(n_modes=n_modes), flags=flags)


def qfi_gaussian_family(spec, kappa, n_b):
    """Channel output of ``spec`` and its exact ``n_b`` derivative, fed to ``qfi_gaussian``."""
    _check_domain(kappa, n_b)
    state = apply_channel(make_source(spec), ChannelParams(kappa, n_b), mode=0)
    dcov = np.zeros_like(state.cov)
    dcov[0:2, 0:2] = np.eye(2)
    result = qfi_gaussian(state.cov, dcov)
    return replace(
        result,
        params=dict(
            kind=spec.kind.value, gain=spec.gain, n_t=spec.n_t, kappa=kappa, n_b=n_b
        ),
    )


@dataclass(frozen=True)
class OverlapParams:
    zeta1: float
    zeta2: float
    xi: float
    nu_pair: tuple


def overlap_params(n_b, n_b_prime, kappa):
    if n_b < 0 or n_b_prime < 0:
        raise ParameterDomainError("noise parameters must be >= 0")
    xi = (n_b + 1.0) * (n_b_prime + 1.0)
    nu, nu_prime = n_b - (kappa - 1.0), n_b_prime - (kappa - 1.0)
    if nu < 0 or nu_prime < 0:
        raise ParameterDomainError(f"unphysical channel for kappa={kappa}")
    root = np.sqrt(xi) - np.sqrt(n_b * n_b_prime)
    zeta1 = 1.0 / root
    zeta2 = (np.sqrt(nu * nu_prime) * root + kappa) / (np.sqrt(xi) * root)
    return OverlapParams(zeta1, zeta2, xi, (nu, nu_prime))


def overlap_bound(n_b, n_b_prime, kappa, photon_dist, m=1):
    """Fidelity ``sum_n p_n zeta1**m zeta2**n`` of the purified channel outputs."""
    p = np.asarray(photon_dist, dtype=float)
    if np.any(p < 0) or not np.isclose(p.sum(), 1.0, rtol=0, atol=1e-12):
        raise ParameterDomainError("photon distribution must be a probability vector")
    params = overlap_params(n_b, n_b_prime, kappa)
    n = np.arange(p.size)
    return float(np.sum(p * params.zeta1 ** m * params.zeta2 ** n))


def richardson(estimate, step):
    """One Richardson step on an O(h^2) estimator; returns ``(value, error)``."""
    coarse, fine = estimate(2.0 * step), estimate(step)
    return (4.0 * fine - coarse) / 3.0, abs(fine - coarse) / 3.0


def fidelity_curvature(fidelity_at, x, step):
    """``-4 d^2 F / dx'^2`` at ``x' = x`` for ``fidelity_at(x')`` = F(x, x')."""
    center = fidelity_at(x)

    def estimate(h):
        return -4.0 * (fidelity_at(x + h) - 2.0 * center + fidelity_at(x - h)) / h ** 2

    return richardson(estimate, step)


def qfi_from_overlap(n_b, kappa, photon_dist, m=1, step=None):
    """Per-mode QFI implied by ``overlap_bound`` for a given photon distribution."""
    step = max(1e-3 * n_b, NUMERICS["fd_min_step"]) if step is None else step
    value, error = fidelity_curvature(
        lambda nb_prime: overlap_bound(n_b, nb_prime, kappa, photon_dist, m), n_b, step
    )
    return FisherResult(
        value / m,
        Method.OVERLAP,
        dict(kappa=kappa, n_b=n_b, m=m),
        error=error / m,
    )
