"""Classical Fisher information of concrete receivers.

Closed forms for homodyne, Bell and photon counting; photon-count laws of
Gaussian states for the nulling receivers; finite-difference Fisher
information of count distributions; sampling and maximum likelihood.
"""
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar
from scipy.special import gammaln, logsumexp, xlogy

from .exceptions import ConfigError, NumericalConvergenceError, ParameterDomainError
from .fock_oracle import tmsv_output_counts
from .gaussian_core import (
    ChannelParams,
    SourceKind,
    SourceSpec,
    apply_channel,
    make_source,
    symplectic_transform,
)
from .qfi_closed_form import FisherResult, Method
from .utils import cfg, log

NUMERICS = cfg["numerics"]
MEASUREMENTS = cfg["measurements"]

OVERFLOW = -1


@dataclass(frozen=True, eq=False)
class CountDistribution:
    """Photon-count probabilities on ``0..n_max`` (per mode) plus the discarded tail."""

    probs: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim not in (1, 2):
            raise ParameterDomainError(f"count distribution must be 1-D or 2-D, got {probs.shape}")
        if probs.min() < -1e-13:
            raise NumericalConvergenceError(f"negative count probability {probs.min():.3e}")
        probs = probs.clip(min=0.0)
        total = probs.sum()
        if total > 1.0 + 1e-9:
            raise NumericalConvergenceError(f"count probabilities sum to {total!r} > 1")
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "tail_mass", max(1.0 - total, 0.0))

    @property
    def joint(self):
        return self.probs.ndim == 2

    @property
    def n_max(self):
        return self.probs.shape[0] - 1

    def marginal(self, mode=0):
        if not self.joint:
            return self.probs
        return self.probs.sum(axis=1 - mode)

    def mean(self, mode=0):
        p = self.marginal(mode)
        return float(np.dot(np.arange(p.size), p))

    def to_frame(self):
        if not self.joint:
            return pd.DataFrame({"n": np.arange(self.probs.size), "prob": self.probs})
        n_r, n_a = np.indices(self.probs.shape)
        return pd.DataFrame(
            {"n": n_r.ravel(), "n_A": n_a.ravel(), "prob": self.probs.ravel()}
        )


@dataclass(frozen=True)
class NulledSvParams:
    """``A = (w1+w2)/2 - 1/2`` and ``B = (w1-w2)/2`` of a single-mode covariance.

    Built from the excess ``V - I/2`` so that ``A`` keeps its relative
    precision when the output is close to vacuum.
    """

    a: float
    b: float

    @classmethod
    def from_excess(cls, excess):
        e = np.asarray(excess, dtype=float)
        return cls(0.5 * (e[0, 0] + e[1, 1]), -np.hypot(0.5 * (e[0, 0] - e[1, 1]), e[0, 1]))

    @classmethod
    def from_covariance(cls, cov):
        return cls.from_excess(np.asarray(cov, dtype=float) - 0.5 * np.eye(2))

    @classmethod
    def channel(cls, gain, kappa, n_b, n_t=0.0, squeeze=None):
        """Squeezed probe through the channel, then anti-squeezed by ``squeeze``.

        ``squeeze`` defaults to the source squeezing ``ln(G)/2``. The
        ``n_b``-free part is summed first, so it is identical for nearby
        ``n_b`` and finite differences see only the noise term.
        """
        source = SourceSpec(SourceKind.SQUEEZED_VACUUM, gain, n_t)
        s = np.exp(2.0 * (source.r if squeeze is None else squeeze))
        q0 = 0.5 * kappa * (gain * source.nu - 1.0)
        p0 = 0.5 * kappa * (source.nu / gain - 1.0)
        a = 0.5 * (q0 / s + p0 * s + 0.5 * (s + 1.0 / s - 2.0)) + 0.5 * n_b * (s + 1.0 / s)
        b = 0.5 * (q0 / s - p0 * s - 0.5 * (s - 1.0 / s)) + 0.5 * n_b * (1.0 / s - s)
        return cls(a, b)


@dataclass(frozen=True)
class NulledTmsvParams:
    """Return and idler occupations and the correlation of blocks ``aI, bI, cZ``.

    ``n_r = a - 1/2``, ``n_a = b - 1/2`` in units where vacuum has variance 1/2.
    """

    n_r: float
    n_a: float
    c: float

    @classmethod
    def from_covariance(cls, cov):
        cov = np.asarray(cov, dtype=float)
        return cls(cov[0, 0] - 0.5, cov[2, 2] - 0.5, cov[0, 2])

    @classmethod
    def channel(cls, n_s, kappa, n_b, n_t=0.0):
        """Nulled output as ``excess(0) + n_b * d excess / d n_b``; the output is linear in ``n_b``."""
        base = nulled_tmsv_covariance(n_s, kappa, 0.0, n_t)
        slope = nulled_tmsv_covariance(n_s, kappa, 1.0, n_t) - base
        return cls(
            (base[0, 0] - 0.5) + n_b * slope[0, 0],
            (base[2, 2] - 0.5) + n_b * slope[2, 2],
            base[0, 2] + n_b * slope[0, 2],
        )


def _gaussian_readout(variance):
    """Fisher information of one zero-mean Gaussian quadrature whose variance moves 1:1 with n_b."""
    return 1.0 / (2.0 * variance ** 2)


def fi_homodyne_vacuum(n_b, n_t=0.0, kappa=1.0):
    ChannelParams(kappa, n_b)
    variance = n_b + kappa * n_t + 0.5
    return FisherResult(
        _gaussian_readout(variance),
        Method.HOMODYNE_VACUUM,
        dict(n_b=n_b, n_t=n_t, kappa=kappa),
    )


def fi_homodyne_sv(gain, kappa, n_b, n_t=0.0):
    """Homodyne on the squeezed quadrature.

    Anti-squeezing before the homodyne leaves the value unchanged.
    """
    ChannelParams(kappa, n_b)
    SourceSpec(SourceKind.SQUEEZED_VACUUM, gain, n_t)
    denominator = gain * (2.0 * n_b + 1.0) - (gain - 1.0) * kappa + 2.0 * kappa * n_t
    return FisherResult(
        2.0 * gain * gain / denominator ** 2,
        Method.HOMODYNE_SV,
        dict(gain=gain, kappa=kappa, n_b=n_b, n_t=n_t),
    )


def fi_bell(gain, kappa, n_b, n_t=0.0):
    """Balanced beamsplitter on return and idler, then dual homodyne."""
    ChannelParams(kappa, n_b)
    source = SourceSpec(SourceKind.TMSV, gain, n_t)
    mu, nu, root = 4.0 * n_b + 2.0 * (1.0 - kappa), source.nu, np.sqrt(kappa)
    denominator = gain * mu + gain * gain * (root - 1.0) ** 2 * nu + (root + 1.0) ** 2 * nu
    return FisherResult(
        16.0 * gain * gain / denominator ** 2,
        Method.BELL,
        dict(gain=gain, kappa=kappa, n_b=n_b, n_t=n_t),
    )


def fi_photon_counting_vacuum(n_b, n_t=0.0, kappa=1.0):
    ChannelParams(kappa, n_b)
    occupation = kappa * n_t + n_b
    if occupation <= 0:
        raise ParameterDomainError("photon-counting Fisher information diverges at zero occupation")
    return FisherResult(
        1.0 / (occupation * (occupation + 1.0)),
        Method.PHOTON_COUNTING,
        dict(n_b=n_b, n_t=n_t, kappa=kappa),
    )


def _legendre_counts(a, b, n_max):
    """Counts of a single-mode state with ``A = (w1+w2)/2 - 1/2``, ``B = (w1-w2)/2``.

    Scaled Legendre recurrence; ``A**2 - B**2`` may be negative.
    """
    d = (a + 1.0) ** 2 - b * b
    if d <= 0:
        raise NumericalConvergenceError(f"non-physical count generating function (D = {d:.3e})")
    sigma = (a * a - b * b) / d
    tau = (a * a + a - b * b) / d
    p = np.zeros(n_max + 1)
    p[0] = d ** -0.5
    if n_max >= 1:
        p[1] = tau * p[0]
    for n in range(1, n_max):
        p[n + 1] = ((2 * n + 1) * tau * p[n] - n * sigma * p[n - 1]) / (n + 1)
    return p


def photon_distribution_single(cov, n_max=None):
    """Photon counts of a zero-mean single-mode Gaussian state with covariance ``cov``."""
    n_max = MEASUREMENTS["n_max"] if n_max is None else n_max
    params = NulledSvParams.from_covariance(cov)
    return CountDistribution(_legendre_counts(params.a, params.b, n_max))


def _joint_d(n1, n2, c):
    """Generating-function coefficients of two modes with occupations ``n1, n2``."""
    c2 = c * c
    d0 = (n1 + 1.0) * (n2 + 1.0) - c2
    d1 = n1 * (n2 + 1.0) - c2
    d2 = n2 * (n1 + 1.0) - c2
    d3 = n1 * n2 - c2
    scale = max(abs(n1 * n2), c2, 1.0)
    if min(d1, d2) < -1e-12 * scale or d0 <= 0:
        raise ParameterDomainError(f"non-physical two-mode occupations {n1}, {n2}, correlation {c}")
    return d0, max(d1, 0.0), max(d2, 0.0), d3


def _finite_sum_counts(n1, n2, c, n_max):
    d0, d1, d2, _ = _joint_d(n1, n2, c)
    n = np.arange(n_max + 1)[:, None, None]
    m = np.arange(n_max + 1)[None, :, None]
    j = np.arange(n_max + 1)[None, None, :]
    valid = (j <= n) & (j <= m)
    nj, mj = np.where(valid, n - j, 0), np.where(valid, m - j, 0)
    log_terms = (
        gammaln(n + 1.0) + gammaln(m + 1.0) - 2.0 * gammaln(j + 1.0)
        - gammaln(nj + 1.0) - gammaln(mj + 1.0)
        + xlogy(j, c * c) + xlogy(nj, d1) + xlogy(mj, d2)
    )
    log_terms = np.where(valid, log_terms, -np.inf)
    log_p = logsumexp(log_terms, axis=2) - (n[:, :, 0] + m[:, :, 0] + 1.0) * np.log(d0)
    return CountDistribution(np.exp(log_p))


def joint_count_distribution(a, b, c, n_max=None):
    """Joint counts of the two-mode state with blocks ``aI, bI, cZ`` by the finite sum."""
    n_max = MEASUREMENTS["n_max_joint"] if n_max is None else n_max
    return _finite_sum_counts(a - 0.5, b - 0.5, c, n_max)


def _hypergeometric_log(n, m, z, max_terms, tolerance):
    """``log 2F1(n+1, m+1; 1; z)`` elementwise for ``0 <= z < 1`` by the term-ratio series."""
    log_term = np.zeros(np.broadcast(n, m).shape)
    log_sum = log_term.copy()
    active = np.ones(log_term.shape, dtype=bool)
    for k in range(max_terms):
        ratio = (n + 1.0 + k) * (m + 1.0 + k) * z / (k + 1.0) ** 2
        log_term = log_term + np.log(ratio)
        log_sum = np.where(active, np.logaddexp(log_sum, log_term), log_sum)
        next_ratio = (n + 2.0 + k) * (m + 2.0 + k) * z / (k + 2.0) ** 2
        with np.errstate(divide="ignore"):
            tail_bound = log_term + np.log(next_ratio) - np.log1p(-np.minimum(next_ratio, 1.0))
        active &= ~((next_ratio < 1.0) & (tail_bound - log_sum < np.log(tolerance)))
        if not active.any():
            return log_sum
    raise NumericalConvergenceError(
        f"hypergeometric series not converged after {max_terms} terms "
        f"(z = {z:.6f}, {int(active.sum())} entries pending)"
    )


def hypergeometric_count_distribution(params, n_max=None, max_terms=None, tolerance=None):
    """Joint counts in the hypergeometric form used for the nulled two-mode output."""
    n_max = MEASUREMENTS["n_max_joint"] if n_max is None else n_max
    max_terms = NUMERICS["hypergeometric_max_terms"] if max_terms is None else max_terms
    tolerance = NUMERICS["hypergeometric_tolerance"] if tolerance is None else tolerance
    n1, n2, c = max(params.n_r, 0.0), max(params.n_a, 0.0), params.c
    d0, d1, d2, d3 = _joint_d(n1, n2, c)
    n = np.arange(n_max + 1)[:, None]
    m = np.arange(n_max + 1)[None, :]
    if c == 0.0:
        log_p = xlogy(n, n1) - (n + 1.0) * np.log1p(n1)
        log_p = log_p + xlogy(m, n2) - (m + 1.0) * np.log1p(n2)
        return CountDistribution(np.exp(log_p))
    scale = max(abs(n1 * n2), c * c, 1e-300)
    z = c * c / (d1 * d2) if d3 > 1e-12 * scale else 1.0
    if z >= NUMERICS["hypergeometric_max_z"]:
        # rank-deficient correlations (lossless nulling) put z at 1
        log(f"hypergeometric argument z = {z:.6f}, using the finite sum", level="debug")
        return _finite_sum_counts(n1, n2, c, n_max)
    if z < 0.0:
        raise NumericalConvergenceError(f"hypergeometric argument z = {z} outside [0, 1)")
    log_p = (
        (n + m + 1.0) * np.log(d3) - (m + 1.0) * np.log(d1) - (n + 1.0) * np.log(d2)
        + _hypergeometric_log(n, m, z, max_terms, tolerance)
    )
    return CountDistribution(np.exp(log_p))


def _check_nulling_channel(kappa, n_b):
    ChannelParams(kappa, n_b)
    if kappa > 1.0:
        raise ParameterDomainError("nulling receivers are defined for kappa <= 1")


def nulled_sv_covariance(gain, kappa, n_b, n_t=0.0, squeeze=None):
    _check_nulling_channel(kappa, n_b)
    spec = SourceSpec(SourceKind.SQUEEZED_VACUUM, gain, n_t)
    squeeze = spec.r if squeeze is None else squeeze
    state = apply_channel(make_source(spec), ChannelParams(kappa, n_b))
    return symplectic_transform(state, "single_mode_squeeze", -squeeze, (0,)).cov


def nulled_sv_distribution(gain, kappa, n_b, n_max=None, n_t=0.0, squeeze=None):
    """Counts after anti-squeezing the return by ``squeeze`` (default ``ln(G)/2``)."""
    _check_nulling_channel(kappa, n_b)
    n_max = MEASUREMENTS["n_max"] if n_max is None else n_max
    params = NulledSvParams.channel(gain, kappa, n_b, n_t, squeeze)
    return CountDistribution(_legendre_counts(params.a, params.b, n_max))


def sv_nulling_squeeze(gain, kappa, n_b, n_t=0.0, n_max=None, mode=None):
    """Anti-squeezing strength of the squeezed-vacuum nulling receiver.

    ``fixed`` undoes the source squeezing, ``ln(G)/2``, which returns the
    probe to vacuum only on the identity channel. ``optimized`` maximizes
    the count Fisher information over ``[0, 1.5 ln(G)/2]`` and keeps the
    fixed strength whenever that does at least as well.
    """
    mode = MEASUREMENTS["sv_nulling"] if mode is None else mode
    if mode not in ("fixed", "optimized"):
        raise ConfigError(f"unknown squeezed-vacuum nulling mode {mode!r}")
    fixed = SourceSpec(SourceKind.SQUEEZED_VACUUM, gain, n_t).r
    if mode == "fixed" or fixed == 0.0:
        return fixed

    def information(squeeze):
        return fi_from_distribution(
            lambda x: nulled_sv_distribution(gain, kappa, x, n_max, n_t, squeeze), n_b
        ).value

    result = minimize_scalar(
        lambda squeeze: -information(squeeze),
        bounds=(0.0, 1.5 * fixed),
        method="bounded",
        options=dict(xatol=NUMERICS["nulling_squeeze_xatol"] * fixed),
    )
    if -result.fun > information(fixed):
        log(
            f"nulling squeeze {result.x:.4f} instead of {fixed:.4f} at kappa={kappa}, n_b={n_b}",
            level="debug",
        )
        return float(result.x)
    return fixed


def tmsv_nulling_angle(n_s, kappa):
    return -np.arcsinh(np.sqrt(kappa * n_s / ((1.0 - kappa) * n_s + 1.0)))


def nulled_tmsv_covariance(n_s, kappa, n_b, n_t=0.0):
    """Return/idler covariance after ``S_2(r2*)``; ``n_s`` is the pure squeezing photon number."""
    _check_nulling_channel(kappa, n_b)
    spec = SourceSpec.from_photon_number(SourceKind.TMSV, n_s, n_t)
    state = apply_channel(make_source(spec), ChannelParams(kappa, n_b), mode=0)
    return symplectic_transform(
        state, "two_mode_squeeze", tmsv_nulling_angle(n_s, kappa), (0, 1)
    ).cov


def nulled_tmsv_distribution(n_s, kappa, n_b, n_max=None, n_t=0.0):
    return hypergeometric_count_distribution(NulledTmsvParams.channel(n_s, kappa, n_b, n_t), n_max)


def _shell_index(dist):
    if dist.joint:
        n_r, n_a = np.indices(dist.probs.shape)
        return (n_r + n_a).ravel()
    return np.arange(dist.probs.size)


def fi_from_distribution(dist_family, n_b, step=None, mass_tolerance=None, fi_tolerance=None):
    """``sum (d log P / d n_b)**2 P`` with a five-point derivative.

    Terms are accumulated by total count; the sum stops once the cumulative
    probability exceeds ``1 - mass_tolerance`` and the last ten shells add
    less than ``fi_tolerance`` relative information.
    """
    if n_b <= 0:
        raise ParameterDomainError("Fisher information about n_b diverges at n_b = 0")
    if step is None:
        step = NUMERICS["distribution_relative_step"] * n_b
    mass_tolerance = NUMERICS["distribution_mass_tolerance"] if mass_tolerance is None else mass_tolerance
    fi_tolerance = NUMERICS["distribution_fi_tolerance"] if fi_tolerance is None else fi_tolerance
    if 2.0 * step >= n_b:
        raise ParameterDomainError(f"step {step} too large for n_b = {n_b}")
    center = dist_family(n_b)
    p = center.probs.ravel()
    around = {k: dist_family(n_b + k * step).probs.ravel() for k in (-2, -1, 1, 2)}
    dp = (8.0 * (around[1] - around[-1]) - (around[2] - around[-2])) / (12.0 * step)
    contributions = np.where(p > 0, dp * dp / np.where(p > 0, p, 1.0), 0.0)

    shells = _shell_index(center)
    shell_fi = np.bincount(shells, weights=contributions)
    shell_mass = np.bincount(shells, weights=p)
    cumulative_fi = np.cumsum(shell_fi)
    cumulative_mass = np.cumsum(shell_mass)
    flags = ()
    value = cumulative_fi[-1]
    for k in range(10, shell_fi.size):
        recent = cumulative_fi[k] - cumulative_fi[k - 10]
        if cumulative_mass[k] > 1.0 - mass_tolerance and recent < fi_tolerance * cumulative_fi[k]:
            value = cumulative_fi[k]
            break
    else:
        log(
            f"count distribution not converged within n_max={center.n_max} "
            f"(tail mass {center.tail_mass:.3e}) at n_b={n_b}",
            level="warning",
        )
        flags = ("truncated",)
    return FisherResult(
        value,
        Method.DISTRIBUTION,
        dict(n_b=n_b, step=step, n_max=center.n_max),
        flags=flags,
    )


def nulled_sv_fi(gain, kappa, n_b, n_max=None, n_t=0.0, mode=None):
    """Count Fisher information with the anti-squeezing held at its value for the true ``n_b``."""
    squeeze = sv_nulling_squeeze(gain, kappa, n_b, n_t, n_max, mode)
    result = fi_from_distribution(
        lambda x: nulled_sv_distribution(gain, kappa, x, n_max, n_t, squeeze), n_b
    )
    return result.scaled(
        1.0, receiver="sv-null", gain=gain, kappa=kappa, n_t=n_t, squeeze=squeeze
    )


def nulled_tmsv_fi(n_s, kappa, n_b, n_max=None, n_t=0.0):
    result = fi_from_distribution(
        lambda x: nulled_tmsv_distribution(n_s, kappa, x, n_max, n_t), n_b
    )
    return result.scaled(1.0, receiver="tmsv-null", n_s=n_s, kappa=kappa, n_t=n_t)


def direct_pd_tmsv_distribution(n_s, kappa, n_b, n_max=None, method="fock", cutoff=None):
    """Joint counts of the un-nulled TMSV channel output."""
    ch = ChannelParams(kappa, n_b)
    if method == "fock":
        probs, _ = tmsv_output_counts(n_s, ch, cutoff=cutoff, n_max=n_max)
        return CountDistribution(probs)
    if method == "closed":
        spec = SourceSpec.from_photon_number(SourceKind.TMSV, n_s)
        cov = apply_channel(make_source(spec), ch, mode=0).cov
        return joint_count_distribution(cov[0, 0], cov[2, 2], cov[0, 2], n_max)
    raise ParameterDomainError(f"unknown direct-detection method {method!r}")


def fi_direct_pd_tmsv(n_s, kappa, n_b, n_max=None, method="fock", cutoff=None):
    result = fi_from_distribution(
        lambda x: direct_pd_tmsv_distribution(n_s, kappa, x, n_max, method, cutoff), n_b
    )
    return result.scaled(1.0, receiver="tmsv-direct-pd", n_s=n_s, kappa=kappa, method=method)


def nulling_asymptote_sv(n_s, n_b):
    """Weak-noise SV-nulling Fisher information on the lossless channel."""
    return (2.0 * n_s + 1.0) / n_b


def nulling_asymptote_tmsv(n_s, kappa, n_b):
    return (1.0 + n_s) / ((1.0 + n_s * (1.0 - kappa)) * n_b)


def sample_counts(dist, n_samples, seed):
    """Inverse-CDF draws; tail mass lands in the ``OVERFLOW`` bucket.

    Joint distributions return ``(n_samples, 2)`` rows of ``(n_R, n_A)``.
    """
    if seed is None:
        raise ParameterDomainError("sampling needs an explicit seed")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(dist.probs.ravel())
    flat = np.searchsorted(cdf, rng.random(int(n_samples)), side="right")
    overflow = flat >= cdf.size
    if not dist.joint:
        return np.where(overflow, OVERFLOW, flat)
    rows = np.column_stack(np.unravel_index(np.minimum(flat, cdf.size - 1), dist.probs.shape))
    rows[overflow] = OVERFLOW
    return rows


@dataclass(frozen=True)
class MleResult:
    estimate: float
    log_likelihood: float
    curvature: float
    n_samples: int
    flags: tuple = ()


def _outcome_counts(samples, shape):
    samples = np.asarray(samples)
    if samples.ndim == 1:
        overflow = samples == OVERFLOW
        counts = np.bincount(samples[~overflow], minlength=shape[0])
    else:
        overflow = samples[:, 0] == OVERFLOW
        kept = samples[~overflow]
        counts = np.zeros(shape, dtype=int)
        np.add.at(counts, (kept[:, 0], kept[:, 1]), 1)
    if counts.shape != tuple(shape):
        raise ParameterDomainError(f"samples exceed the model support {shape}")
    return counts, int(overflow.sum())


def mle_estimate(samples, model, bracket, xatol=None):
    """Maximize the count log-likelihood of ``model(n_b)`` over ``bracket``."""
    lo, hi = float(bracket[0]), float(bracket[1])
    if not 0 < lo < hi:
        raise ParameterDomainError(f"bracket must satisfy 0 < lo < hi, got {bracket}")
    xatol = 1e-6 * lo if xatol is None else xatol
    shape = model(lo).probs.shape
    counts, overflow = _outcome_counts(samples, shape)
    n_samples = int(counts.sum()) + overflow

    def log_likelihood(n_b):
        dist = model(n_b)
        with np.errstate(divide="ignore"):
            value = np.sum(xlogy(counts, dist.probs))
            if overflow:
                value += overflow * np.log(dist.tail_mass)
        return value if np.isfinite(value) else -1e300

    result = minimize_scalar(
        lambda x: -log_likelihood(x), bounds=(lo, hi), method="bounded", options=dict(xatol=xatol)
    )
    estimate = float(result.x)
    h = max(1e-3 * estimate, xatol)
    left, right = max(estimate - h, lo), min(estimate + h, hi)
    mid = 0.5 * (left + right)
    half = 0.5 * (right - left)
    curvature = -(log_likelihood(right) - 2.0 * log_likelihood(mid) + log_likelihood(left)) / half ** 2
    flags = ()
    if estimate - lo < 10.0 * xatol or hi - estimate < 10.0 * xatol:
        log(f"maximum-likelihood estimate {estimate:.6g} sits on the bracket {bracket}", level="warning")
        flags = ("boundary",)
    return MleResult(estimate, -float(result.fun), float(curvature), n_samples, flags)
