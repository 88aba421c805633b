"""Gaussian states in the real quadrature picture.

Covariances use the ordering (q1, p1, ..., qM, pM) with vacuum variance 1/2.
Every operation returns a new state; arrays held by a state are read-only.
"""
import enum
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ParameterDomainError

PHYSICALITY_TOLERANCE = 1e-12


class SourceKind(enum.Enum):
    VACUUM = "vacuum"
    SQUEEZED_VACUUM = "sv"
    TMSV = "tmsv"

    @classmethod
    def parse(cls, name):
        aliases = {"vac": "vacuum", "squeezed": "sv", "squeezed_vacuum": "sv"}
        key = str(name).strip().lower()
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ParameterDomainError(f"unknown source kind {name!r}")


@dataclass(frozen=True)
class ChannelParams:
    """Phase-covariant channel: transmissivity ``kappa`` and added noise ``n_b``."""

    kappa: float
    n_b: float

    def __post_init__(self):
        kappa, n_b = float(self.kappa), float(self.n_b)
        if not (np.isfinite(kappa) and np.isfinite(n_b)):
            raise ParameterDomainError(f"non-finite channel parameters {self}")
        if kappa < 0 or n_b < 0:
            raise ParameterDomainError(
                f"kappa and n_b must be non-negative, got kappa={kappa}, n_b={n_b}"
            )
        if n_b < max(kappa - 1.0, 0.0) - PHYSICALITY_TOLERANCE:
            raise ParameterDomainError(
                f"unphysical channel: n_b={n_b} < kappa - 1 = {kappa - 1.0}"
            )
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "n_b", n_b)

    @property
    def kind(self):
        if self.kappa < 1:
            return "thermal-loss"
        if self.kappa == 1:
            return "awgn"
        return "amplifier"

    def output_params(self, n_t=0.0):
        return ChannelOutputParams.from_channel(self, n_t)


@dataclass(frozen=True)
class SourceSpec:
    kind: SourceKind
    gain: float = 1.0
    n_t: float = 0.0

    def __post_init__(self):
        kind = self.kind if isinstance(self.kind, SourceKind) else SourceKind.parse(self.kind)
        gain, n_t = float(self.gain), float(self.n_t)
        if not np.isfinite(gain) or gain < 1.0:
            raise ParameterDomainError(f"squeezing gain must be >= 1, got {gain}")
        if not np.isfinite(n_t) or n_t < 0.0:
            raise ParameterDomainError(f"thermal occupation must be >= 0, got {n_t}")
        if kind is SourceKind.VACUUM and gain != 1.0:
            raise ParameterDomainError("a vacuum source has gain 1")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "gain", gain)
        object.__setattr__(self, "n_t", n_t)

    @classmethod
    def from_photon_number(cls, kind, n_s, n_t=0.0):
        """Source whose pure squeezing carries ``n_s`` photons."""
        if n_s < 0:
            raise ParameterDomainError(f"photon number must be >= 0, got {n_s}")
        kind = kind if isinstance(kind, SourceKind) else SourceKind.parse(kind)
        if kind is SourceKind.VACUUM:
            return cls(kind, 1.0, n_t)
        return cls(kind, 1.0 + 2.0 * n_s + 2.0 * np.sqrt(n_s * (n_s + 1.0)), n_t)

    @property
    def r(self):
        return 0.5 * np.log(self.gain)

    @property
    def gain_db(self):
        return 10.0 * np.log10(self.gain)

    @property
    def nu(self):
        return 2.0 * self.n_t + 1.0

    @property
    def n_s(self):
        """Mean photon number per signal mode, thermal contamination included."""
        g = self.gain
        return (2.0 * (g * g + 1.0) * self.n_t + (g - 1.0) ** 2) / (4.0 * g)

    @property
    def n_squeeze(self):
        """Photons from squeezing alone, ``sinh(r)**2``."""
        return (self.gain - 1.0) ** 2 / (4.0 * self.gain)

    @property
    def c_p(self):
        n = self.n_squeeze
        return np.sqrt(n * (n + 1.0))

    @property
    def n_modes(self):
        return 2 if self.kind is SourceKind.TMSV else 1


@dataclass(frozen=True)
class ChannelOutputParams:
    mu: float
    nu: float

    @classmethod
    def from_channel(cls, ch, n_t=0.0):
        return cls(mu=4.0 * ch.n_b + 2.0 * (1.0 - ch.kappa), nu=2.0 * n_t + 1.0)


@dataclass(frozen=True, eq=False)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray
    n_modes: int = field(init=False)

    def __post_init__(self):
        cov = np.array(self.cov, dtype=float)
        mean = np.array(self.mean, dtype=float).reshape(-1)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
            raise ParameterDomainError(f"covariance must be 2M x 2M, got {cov.shape}")
        if mean.shape[0] != cov.shape[0]:
            raise ParameterDomainError("mean and covariance sizes differ")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise ParameterDomainError("covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        cov.flags.writeable = False
        mean.flags.writeable = False
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "n_modes", cov.shape[0] // 2)

    def block(self, i, j=None):
        j = i if j is None else j
        return self.cov[2 * i:2 * i + 2, 2 * j:2 * j + 2]

    def replace(self, mean=None, cov=None):
        return GaussianState(
            self.mean if mean is None else mean, self.cov if cov is None else cov
        )


def symplectic_form(n_modes):
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def is_physical(state, tol=1e-10):
    """Uncertainty relation ``V + i/2 Omega >= 0``."""
    herm = state.cov + 0.5j * symplectic_form(state.n_modes)
    return bool(np.linalg.eigvalsh(herm).min() >= -tol)


def photon_number(state, mode=0):
    block = state.block(mode)
    q, p = state.mean[2 * mode], state.mean[2 * mode + 1]
    return 0.5 * (np.trace(block) + q * q + p * p - 1.0)


def vacuum_state(n_modes=1):
    return GaussianState(np.zeros(2 * n_modes), 0.5 * np.eye(2 * n_modes))


def thermal_state(n):
    if n < 0:
        raise ParameterDomainError(f"thermal occupation must be >= 0, got {n}")
    return GaussianState(np.zeros(2), (n + 0.5) * np.eye(2))


def make_source(spec):
    """Covariance of the probe before it enters the channel."""
    thermal = (spec.n_t + 0.5) * np.eye(2)
    if spec.kind is SourceKind.VACUUM:
        return GaussianState(np.zeros(2), thermal)
    if spec.kind is SourceKind.SQUEEZED_VACUUM:
        state = GaussianState(np.zeros(2), thermal)
        return symplectic_transform(state, "single_mode_squeeze", spec.r, (0,))
    state = GaussianState(np.zeros(4), np.kron(np.eye(2), thermal))
    return symplectic_transform(state, "two_mode_squeeze", spec.r, (0, 1))


def _check_mode(state, mode):
    if not 0 <= mode < state.n_modes:
        raise ParameterDomainError(f"mode {mode} out of range for {state.n_modes} modes")


def _apply_mode_map(state, mode, scale, noise):
    """``V -> scale V + noise I`` on one mode, mean scaled by ``sqrt(scale)``."""
    _check_mode(state, mode)
    t = np.ones(2 * state.n_modes)
    t[2 * mode:2 * mode + 2] = np.sqrt(scale)
    cov = state.cov * np.outer(t, t)
    cov[2 * mode:2 * mode + 2, 2 * mode:2 * mode + 2] += noise * np.eye(2)
    return GaussianState(state.mean * t, cov)


def apply_channel(state, ch, mode=0):
    """Phase-covariant channel on one mode: ``V -> kappa V + (mu/4) I``."""
    mu = ch.output_params().mu
    return _apply_mode_map(state, mode, ch.kappa, 0.25 * mu)


def apply_loss(state, eta, mode=0):
    if not 0.0 <= eta <= 1.0:
        raise ParameterDomainError(f"loss transmissivity must lie in [0, 1], got {eta}")
    return _apply_mode_map(state, mode, eta, 0.5 * (1.0 - eta))


def apply_amplifier(state, g, mode=0):
    if g < 1.0:
        raise ParameterDomainError(f"amplifier gain must be >= 1, got {g}")
    return _apply_mode_map(state, mode, g, 0.5 * (g - 1.0))


def decompose_channel(ch):
    """Quantum-limited loss ``eta`` followed by quantum-limited amplifier ``g``."""
    g = 1.0 + ch.n_b
    eta = min(ch.kappa / g, 1.0)
    return eta, g


def beamsplitter(theta):
    c, s = np.cos(theta), np.sin(theta)
    eye = np.eye(2)
    return np.block([[c * eye, s * eye], [-s * eye, c * eye]])


def single_mode_squeeze(r):
    """``q`` stretched by ``e^r``, ``p`` compressed by ``e^-r``."""
    return np.diag([np.exp(r), np.exp(-r)])


def two_mode_squeeze(r):
    ch, sh = np.cosh(r), np.sinh(r)
    eye, z = np.eye(2), np.diag([1.0, -1.0])
    return np.block([[ch * eye, sh * z], [sh * z, ch * eye]])


_SYMPLECTIC = {
    "beamsplitter": (beamsplitter, 2),
    "single_mode_squeeze": (single_mode_squeeze, 1),
    "two_mode_squeeze": (two_mode_squeeze, 2),
}


def embed(matrix, modes, n_modes):
    """Lift a symplectic on ``modes`` to the full 2M x 2M space."""
    idx = np.concatenate([[2 * m, 2 * m + 1] for m in modes])
    full = np.eye(2 * n_modes)
    full[np.ix_(idx, idx)] = matrix
    return full


def symplectic_transform(state, kind, parameter, modes):
    try:
        builder, arity = _SYMPLECTIC[kind]
    except KeyError:
        raise ParameterDomainError(f"unknown symplectic transform {kind!r}")
    modes = tuple(int(m) for m in modes)
    if len(modes) != arity or len(set(modes)) != arity:
        raise ParameterDomainError(f"{kind} needs {arity} distinct modes, got {modes}")
    for m in modes:
        _check_mode(state, m)
    s = embed(builder(parameter), modes, state.n_modes)
    return GaussianState(s @ state.mean, s @ state.cov @ s.T)


def gaussian_fidelity(state0, state1):
    """Uhlmann fidelity of two zero-mean single-mode Gaussian states."""
    if state0.n_modes != 1 or state1.n_modes != 1:
        raise ParameterDomainError("closed-form fidelity is single-mode only")
    if np.any(state0.mean) or np.any(state1.mean):
        raise ParameterDomainError("closed-form fidelity assumes zero-mean states")
    delta = np.linalg.det(state0.cov + state1.cov)
    lam = 4.0 * (np.linalg.det(state0.cov) - 0.25) * (np.linalg.det(state1.cov) - 0.25)
    lam = max(lam, 0.0)
    return float(1.0 / np.sqrt(np.sqrt(delta + lam) - np.sqrt(lam)))
