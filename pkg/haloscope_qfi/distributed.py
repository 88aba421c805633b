"""Fully-correlated noise over an array of identical sensors.

Each of ``m`` modes sees the same loss ``kappa`` and the same classical
noise realization of strength ``n_b``. Interfering the array on a uniform
beamsplitter network concentrates all of the correlated noise, ``m * n_b``,
in a single output mode.
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .exceptions import ParameterDomainError
from .gaussian_core import (
    ChannelParams,
    GaussianState,
    apply_channel,
    apply_loss,
    symplectic_form,
    symplectic_transform,
    vacuum_state,
)
from .qfi_closed_form import ub_combined
from .utils import log

REDUCTION_TOLERANCE = 1e-12


@dataclass(frozen=True)
class CorrelatedChannelSpec:
    m: int
    ch: ChannelParams

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ParameterDomainError(f"mode count must be a positive integer, got {self.m}")
        if not isinstance(self.ch, ChannelParams):
            object.__setattr__(self, "ch", ChannelParams(*self.ch))
        object.__setattr__(self, "m", int(self.m))

    @property
    def reduced_channel(self):
        return ChannelParams(self.ch.kappa, self.m * self.ch.n_b)


def apply_correlated_channel(state, spec):
    """``V -> kappa V + (1 - kappa)/2 I + n_b (E x I2)`` with ``E`` all ones."""
    if state.n_modes != spec.m:
        raise ParameterDomainError(
            f"state has {state.n_modes} modes, channel acts on {spec.m}"
        )
    kappa, n_b = spec.ch.kappa, spec.ch.n_b
    size = 2 * spec.m
    noise = 0.5 * (1.0 - kappa) * np.eye(size) + n_b * np.kron(
        np.ones((spec.m, spec.m)), np.eye(2)
    )
    return GaussianState(np.sqrt(kappa) * state.mean, kappa * state.cov + noise)


def uniform_interferometer(m):
    """Real orthogonal ``m x m`` matrix whose first row is ``1/sqrt(m)``."""
    uniform = np.full(m, 1.0 / np.sqrt(m))
    v = uniform.copy()
    v[0] -= 1.0
    norm = v @ v
    if norm < 1e-30:
        return np.eye(m)
    return np.eye(m) - 2.0 * np.outer(v, v) / norm


def uniform_beamsplitter(m):
    """Quadrature symplectic ``O x I2`` of the uniform interferometer."""
    return np.kron(uniform_interferometer(m), np.eye(2))


def _conjugate(state, s):
    return GaussianState(s @ state.mean, s @ state.cov @ s.T)


def _reduced_target(state, spec):
    out = apply_channel(state, spec.reduced_channel, mode=0)
    for mode in range(1, spec.m):
        out = apply_loss(out, spec.ch.kappa, mode=mode)
    return out


def random_squeezed_states(m, count, seed, max_r=1.0):
    """Product squeezed vacua mixed by random beamsplitters."""
    rng = np.random.default_rng(seed)
    states = []
    for _ in range(count):
        state = vacuum_state(m)
        for mode in range(m):
            state = symplectic_transform(
                state, "single_mode_squeeze", rng.uniform(-max_r, max_r), (mode,)
            )
        if m > 1:
            for _ in range(2 * m):
                i, j = rng.choice(m, size=2, replace=False)
                state = symplectic_transform(
                    state, "beamsplitter", rng.uniform(0.0, np.pi), (int(i), int(j))
                )
        states.append(state)
    return states


@dataclass
class ReductionReport:
    m: int
    kappa: float
    n_b: float
    deviations: List[float]
    orthogonality_error: float
    symplectic_error: float
    tolerance: float
    ub_bound: Optional[float] = None
    max_deviation: float = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        self.max_deviation = max(self.deviations, default=0.0)
        self.passed = bool(
            max(self.max_deviation, self.orthogonality_error, self.symplectic_error)
            <= self.tolerance
        )

    def to_dict(self):
        return dict(
            m=self.m,
            kappa=self.kappa,
            n_b=self.n_b,
            n_states=len(self.deviations),
            max_deviation=self.max_deviation,
            orthogonality_error=self.orthogonality_error,
            symplectic_error=self.symplectic_error,
            tolerance=self.tolerance,
            ub_bound=self.ub_bound,
            passed=self.passed,
        )


def verify_reduction(spec, test_states, n_s=None, tolerance=REDUCTION_TOLERANCE):
    """Compare the conjugated correlated channel against the reduced channel.

    The network ``B`` is involutory, so ``B^-1 = B``. The reference applies
    a thermal channel with noise ``m * n_b`` to mode 0 and pure loss to the
    remaining modes. When ``n_s`` is given the report carries the combined
    upper bound of the reduced single-mode problem.
    """
    s = uniform_beamsplitter(spec.m)
    omega = symplectic_form(spec.m)
    orthogonality = float(np.abs(s @ s.T - np.eye(2 * spec.m)).max())
    symplecticity = float(np.abs(s @ omega @ s.T - omega).max())

    deviations = []
    for state in test_states:
        conjugated = _conjugate(apply_correlated_channel(_conjugate(state, s), spec), s)
        target = _reduced_target(state, spec)
        deviations.append(
            float(
                max(
                    np.abs(conjugated.cov - target.cov).max(),
                    np.abs(conjugated.mean - target.mean).max(),
                )
            )
        )

    bound = None
    if n_s is not None and spec.ch.n_b > 0:
        reduced = spec.reduced_channel
        bound = ub_combined(n_s, reduced.kappa, reduced.n_b).value

    report = ReductionReport(
        spec.m,
        spec.ch.kappa,
        spec.ch.n_b,
        deviations,
        orthogonality,
        symplecticity,
        tolerance,
        bound,
    )
    if not report.passed:
        log(f"correlated-channel reduction failed: {report.to_dict()}", "warning")
    return report
