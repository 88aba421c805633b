"""Brute-force number-basis oracle.

States are truncated density matrices; channels act through their Kraus
decomposition (quantum-limited loss, then quantum-limited amplifier). Every
Kraus operator is a shifted diagonal, so it is stored as one coefficient row
and applied by slicing instead of matrix products.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.sparse.csgraph import connected_components
from scipy.special import gammaln, xlogy

from .exceptions import ParameterDomainError, TruncationError
from .gaussian_core import ChannelParams, SourceKind, decompose_channel
from .qfi_closed_form import FisherResult, Method, richardson
from .utils import cfg, log

ORACLE = cfg["oracle"]
NUMERICS = cfg["numerics"]

# Kraus rows below this amplitude contribute < 1e-34 to any entry
NEGLIGIBLE_AMPLITUDE = 1e-17


@dataclass(frozen=True, eq=False)
class FockDensityMatrix:
    matrix: np.ndarray
    cutoff: int
    n_modes: int = 1
    tail_mass: float = 0.0

    def __post_init__(self):
        matrix = np.array(self.matrix)
        dim = self.cutoff ** self.n_modes
        if matrix.shape != (dim, dim):
            raise ParameterDomainError(
                f"expected a {dim} x {dim} matrix for cutoff {self.cutoff}, got {matrix.shape}"
            )
        scale = max(np.abs(matrix).max(), 1.0)
        if np.abs(matrix - matrix.conj().T).max() > 1e-10 * scale:
            raise ParameterDomainError("density matrix is not Hermitian")
        matrix = 0.5 * (matrix + matrix.conj().T)
        matrix.flags.writeable = False
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "tail_mass", float(self.tail_mass))

    @property
    def trace(self):
        return float(np.real(np.trace(self.matrix)))

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.matrix).min())

    def photon_distribution(self):
        """Diagonal populations; shape ``(D,)`` or ``(D, D)`` for (signal, idler)."""
        diag = np.real(np.diag(self.matrix)).clip(min=0.0)
        if self.n_modes == 2:
            return diag.reshape(self.cutoff, self.cutoff)
        return diag

    def mean_photon(self, mode=0):
        p = self.photon_distribution()
        if self.n_modes == 2:
            p = p.sum(axis=1 - mode)
        return float(np.dot(np.arange(self.cutoff), p))


@dataclass(frozen=True, eq=False)
class KrausSet:
    """Row ``j`` holds the shifted diagonal of operator ``j``.

    Loss: ``E_k |n> = coefficients[k, n] |n - k>``.
    Amplifier: ``A_l |n> = coefficients[l, n] |n + l>``.
    """

    coefficients: np.ndarray
    kind: str
    parameter: float
    cutoff: int = field(init=False)

    def __post_init__(self):
        coefficients = np.asarray(self.coefficients, dtype=float)
        coefficients.flags.writeable = False
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "cutoff", coefficients.shape[1])

    @property
    def operators(self):
        d = self.cutoff
        ops = []
        for j, row in enumerate(self.coefficients):
            op = np.zeros((d, d))
            if self.kind == "loss":
                op[np.arange(d - j), np.arange(j, d)] = row[j:]
            else:
                op[np.arange(j, d), np.arange(d - j)] = row[: d - j]
            ops.append(op)
        return ops

    def completeness_deviation(self, levels):
        """``max |sum_j E_j^dag E_j - I|`` on the first ``levels`` number states."""
        total = sum(op.T @ op for op in self.operators)
        block = total[:levels, :levels]
        return float(np.abs(block - np.eye(levels)).max())


def loss_kraus(eta, cutoff):
    if not 0.0 <= eta <= 1.0:
        raise ParameterDomainError(f"loss transmissivity must lie in [0, 1], got {eta}")
    n = np.arange(cutoff)[None, :]
    k = np.arange(cutoff)[:, None]
    valid = n >= k
    m = np.where(valid, n - k, 0)
    log_c = (
        gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(m + 1.0)
        + xlogy(m, eta) + xlogy(k, 1.0 - eta)
    )
    return KrausSet(np.where(valid, np.exp(0.5 * log_c), 0.0), "loss", eta)


def amplifier_kraus(g, cutoff):
    if g < 1.0:
        raise ParameterDomainError(f"amplifier gain must be >= 1, got {g}")
    n = np.arange(cutoff)[None, :]
    ell = np.arange(cutoff)[:, None]
    log_c = (
        gammaln(n + ell + 1.0) - gammaln(ell + 1.0) - gammaln(n + 1.0)
        + xlogy(ell, 1.0 - 1.0 / g) - (n + 1.0) * np.log(g)
    )
    return KrausSet(np.exp(0.5 * log_c), "amp", g)


def kraus_channel(ch, cutoff):
    eta, g = decompose_channel(ch)
    return loss_kraus(eta, cutoff), amplifier_kraus(g, cutoff)


def _apply_kraus(tensor, kraus, n_modes):
    """Apply a shifted-diagonal Kraus set to the first (signal) mode."""
    d = kraus.cutoff
    out = np.zeros_like(tensor)
    for j, row in enumerate(kraus.coefficients):
        if j >= d or row.max() < NEGLIGIBLE_AMPLITUDE:
            continue
        if kraus.kind == "loss":
            src, dst, amp = slice(j, d), slice(0, d - j), row[j:]
        else:
            src, dst, amp = slice(0, d - j), slice(j, d), row[: d - j]
        if n_modes == 1:
            out[dst, dst] += np.outer(amp, amp) * tensor[src, src]
        else:
            weight = amp[:, None, None, None] * amp[None, None, :, None]
            out[dst, :, dst, :] += weight * tensor[src, :, src, :]
    return out


def _pad(matrix, cutoff, new_cutoff, n_modes):
    if n_modes == 1:
        out = np.zeros((new_cutoff, new_cutoff), dtype=matrix.dtype)
        out[:cutoff, :cutoff] = matrix
        return out
    tensor = matrix.reshape(cutoff, cutoff, cutoff, cutoff)
    out = np.zeros((new_cutoff,) * 4, dtype=matrix.dtype)
    out[:cutoff, :cutoff, :cutoff, :cutoff] = tensor
    return out.reshape(new_cutoff ** 2, new_cutoff ** 2)


def apply_channel_fock(rho, ch, tail_tolerance=None, max_cutoff=None):
    """Loss then amplifier on mode 0; enlarges the cutoff until the tail fits."""
    tail_tolerance = ORACLE["tail_tolerance"] if tail_tolerance is None else tail_tolerance
    if max_cutoff is None:
        max_cutoff = ORACLE["max_cutoff"] if rho.n_modes == 1 else ORACLE["two_mode_cutoff"]
    cutoff = rho.cutoff
    trace_in = rho.trace
    while True:
        matrix = _pad(rho.matrix, rho.cutoff, cutoff, rho.n_modes)
        shape = (cutoff,) * (2 * rho.n_modes)
        tensor = matrix.reshape(shape)
        loss, amp = kraus_channel(ch, cutoff)
        tensor = _apply_kraus(_apply_kraus(tensor, loss, rho.n_modes), amp, rho.n_modes)
        out = tensor.reshape(matrix.shape)
        trace_out = float(np.real(np.trace(out)))
        lost = trace_in - trace_out
        if lost < tail_tolerance:
            return FockDensityMatrix(
                out / trace_out, cutoff, rho.n_modes, tail_mass=rho.tail_mass + max(lost, 0.0)
            )
        if cutoff >= max_cutoff:
            raise TruncationError(
                f"channel output leaks {lost:.3e} beyond cutoff {cutoff}",
                tail_mass=lost,
                cutoff=cutoff,
            )
        new_cutoff = min(int(np.ceil(1.5 * cutoff)), max_cutoff)
        log(f"tail {lost:.3e} at cutoff {cutoff}, retrying at {new_cutoff}", level="debug")
        cutoff = new_cutoff


def _check_tail(tail, cutoff, tail_tolerance, what):
    if tail > tail_tolerance:
        raise TruncationError(
            f"{what} tail mass {tail:.3e} exceeds {tail_tolerance:.1e} at cutoff {cutoff}",
            tail_mass=tail,
            cutoff=cutoff,
        )


def tmsv_schmidt(r, cutoff):
    """Amplitudes ``tanh(r)**n / cosh(r)`` and the discarded tail mass."""
    n = np.arange(cutoff)
    log_c = xlogy(n, np.tanh(abs(r))) - np.log(np.cosh(r))
    c = np.exp(log_c)
    return c, max(1.0 - float(np.dot(c, c)), 0.0)


def _source_amplitudes(spec, cutoff):
    r = spec.r
    if spec.kind is SourceKind.VACUUM:
        psi = np.zeros(cutoff)
        psi[0] = 1.0
        return psi, 0.0
    if spec.kind is SourceKind.SQUEEZED_VACUUM:
        m = np.arange((cutoff + 1) // 2)
        log_c = (
            xlogy(m, np.tanh(r)) + 0.5 * gammaln(2 * m + 1.0)
            - m * np.log(2.0) - gammaln(m + 1.0) - 0.5 * np.log(np.cosh(r))
        )
        psi = np.zeros(cutoff)
        psi[2 * m] = np.exp(log_c)
        return psi, max(1.0 - float(np.dot(psi, psi)), 0.0)
    c, tail = tmsv_schmidt(r, cutoff)
    psi = np.zeros(cutoff * cutoff)
    psi[np.arange(cutoff) * (cutoff + 1)] = c
    return psi, tail


def fock_from_source(spec, cutoff=None, tail_tolerance=None, max_cutoff=None):
    """Pure source in the number basis; single-mode cutoffs grow until the tail fits."""
    tail_tolerance = ORACLE["tail_tolerance"] if tail_tolerance is None else tail_tolerance
    if spec.n_t != 0:
        raise ParameterDomainError("the Fock oracle only prepares pure sources (n_t = 0)")
    if spec.kind is SourceKind.TMSV:
        cutoff = ORACLE["two_mode_cutoff"] if cutoff is None else cutoff
        max_cutoff = cutoff if max_cutoff is None else max_cutoff
    else:
        cutoff = ORACLE["cutoff"] if cutoff is None else cutoff
        max_cutoff = ORACLE["max_cutoff"] if max_cutoff is None else max_cutoff
    psi, tail = _source_amplitudes(spec, cutoff)
    while tail > tail_tolerance and cutoff < max_cutoff:
        cutoff = min(int(np.ceil(1.5 * cutoff)), max_cutoff)
        psi, tail = _source_amplitudes(spec, cutoff)
    _check_tail(tail, cutoff, tail_tolerance, f"{spec.kind.value} source")
    psi = psi / np.linalg.norm(psi)
    return FockDensityMatrix(np.outer(psi, psi), cutoff, spec.n_modes, tail_mass=tail)


def thermal_fock(n, cutoff=None):
    cutoff = ORACLE["cutoff"] if cutoff is None else cutoff
    k = np.arange(cutoff)
    p = np.exp(xlogy(k, n) - (k + 1.0) * np.log1p(n))
    tail = max(1.0 - p.sum(), 0.0)
    return FockDensityMatrix(np.diag(p / p.sum()), cutoff, tail_mass=tail)


def squeeze_generator(r, cutoff):
    """Truncated ``(r/2)(a^dag^2 - a^2)``; stretches ``q`` for ``r > 0``."""
    n = np.arange(cutoff - 2)
    gen = np.zeros((cutoff, cutoff))
    gen[n + 2, n] = 0.5 * r * np.sqrt((n + 1.0) * (n + 2.0))
    return gen - gen.T


def squeeze_fock(rho, r, cutoff=None):
    """``S(r) rho S(r)^dag``, zero-padded to ``cutoff`` first when that is larger."""
    if rho.n_modes != 1:
        raise ParameterDomainError("single-mode squeezing needs a single-mode state")
    cutoff = rho.cutoff if cutoff is None else max(cutoff, rho.cutoff)
    matrix = _pad(rho.matrix, rho.cutoff, cutoff, 1)
    u = scipy.linalg.expm(squeeze_generator(r, cutoff))
    return FockDensityMatrix(u @ matrix @ u.T, cutoff, 1, rho.tail_mass)


def _sector_generator(r, delta, size):
    """``r (a^dag b^dag - a b)`` on the basis ``|n + delta, n>`` for ``n >= max(0, -delta)``."""
    n = np.arange(max(0, -delta), max(0, -delta) + size - 1)
    gen = np.zeros((size, size))
    idx = np.arange(size - 1)
    gen[idx + 1, idx] = r * np.sqrt((n + delta + 1.0) * (n + 1.0))
    return gen - gen.T


def _tmsv_sectors(n_s, ch, cutoff, tail_tolerance):
    """Channel output of a TMSV as blocks ``{delta: (n0, block)}`` with ``delta = n_s - n_i``."""
    r = np.arcsinh(np.sqrt(n_s))
    c, tail = tmsv_schmidt(r, cutoff)
    _check_tail(tail, cutoff, tail_tolerance, "tmsv source")
    c = c / np.linalg.norm(c)
    loss, amp = kraus_channel(ch, cutoff)
    b_mat = loss.coefficients.T
    a_mat = amp.coefficients.T
    n = np.arange(cutoff)
    sectors = {}
    kept = 0.0
    for delta in range(-(cutoff - 1), cutoff):
        n0 = max(0, -delta)
        n_hi = min(cutoff, cutoff - delta)
        k = np.arange(max(0, -delta), cutoff)
        ell = k + delta
        k, ell = k[ell < cutoff], ell[ell < cutoff]
        if k.size == 0 or n_hi <= n0:
            continue
        idler = n[None, n0:n_hi]
        shift = idler - k[:, None]
        valid = shift >= 0
        v = (
            c[None, n0:n_hi]
            * np.where(valid, b_mat[idler, k[:, None]], 0.0)
            * np.where(valid, a_mat[shift.clip(min=0), ell[:, None]], 0.0)
        )
        block = v.T @ v
        kept += np.trace(block)
        sectors[delta] = (n0, block)
    lost = 1.0 - kept
    _check_tail(lost, cutoff, tail_tolerance, "tmsv channel output")
    return sectors, max(lost, 0.0)


def tmsv_output_counts(n_s, ch, r2=0.0, cutoff=None, n_max=None, tail_tolerance=None):
    """Joint counts ``P[n_signal, n_idler]`` after the channel and an optional ``S_2(r2)``."""
    cutoff = ORACLE["counts_cutoff"] if cutoff is None else cutoff
    n_max = cfg["measurements"]["n_max_joint"] if n_max is None else n_max
    tail_tolerance = ORACLE["tail_tolerance"] if tail_tolerance is None else tail_tolerance
    sectors, _ = _tmsv_sectors(n_s, ch, cutoff, tail_tolerance)
    probs = np.zeros((n_max + 1, n_max + 1))
    for delta, (n0, block) in sectors.items():
        if r2 != 0.0:
            u = scipy.linalg.expm(_sector_generator(r2, delta, block.shape[0]))
            block = u @ block @ u.T
        idler = np.arange(n0, n0 + block.shape[0])
        signal = idler + delta
        keep = (idler <= n_max) & (signal <= n_max)
        probs[signal[keep], idler[keep]] = np.diag(block)[keep].clip(min=0.0)
    return probs, max(1.0 - probs.sum(), 0.0)


@dataclass(frozen=True, eq=False)
class SectorDensityMatrix:
    """Two-mode state stored as its blocks ``{delta: (n0, block)}``.

    Block ``delta`` lives on ``|n + delta, n>`` for ``n = n0 .. n0 + size - 1``.
    """

    blocks: dict
    cutoff: int
    tail_mass: float = 0.0
    n_modes: int = field(default=2, init=False)

    @property
    def trace(self):
        return float(sum(np.trace(block) for _, block in self.blocks.values()))

    def photon_distribution(self):
        probs = np.zeros((self.cutoff, self.cutoff))
        for delta, (n0, block) in self.blocks.items():
            idler = np.arange(n0, n0 + block.shape[0])
            probs[idler + delta, idler] = np.diag(block).clip(min=0.0)
        return probs

    def to_fock(self):
        d = self.cutoff
        matrix = np.zeros((d * d, d * d))
        for delta, (n0, block) in self.blocks.items():
            idler = np.arange(n0, n0 + block.shape[0])
            flat = (idler + delta) * d + idler
            matrix[np.ix_(flat, flat)] = block
        return FockDensityMatrix(matrix, d, 2, tail_mass=self.tail_mass)


def tmsv_output_sectors(n_s, ch, cutoff=None, tail_tolerance=None):
    cutoff = ORACLE["counts_cutoff"] if cutoff is None else cutoff
    tail_tolerance = ORACLE["tail_tolerance"] if tail_tolerance is None else tail_tolerance
    sectors, tail = _tmsv_sectors(n_s, ch, cutoff, tail_tolerance)
    norm = sum(np.trace(block) for _, block in sectors.values())
    blocks = {delta: (n0, block / norm) for delta, (n0, block) in sectors.items()}
    return SectorDensityMatrix(blocks, cutoff, tail_mass=tail)


def tmsv_output_fock(n_s, ch, cutoff=None, tail_tolerance=None):
    """Full two-mode channel output assembled from its sector blocks."""
    cutoff = ORACLE["two_mode_cutoff"] if cutoff is None else cutoff
    return tmsv_output_sectors(n_s, ch, cutoff, tail_tolerance).to_fock()


def _sqrt_psd(block, psd_tolerance, eigen_clip):
    w, v = np.linalg.eigh(block)
    top = max(w.max(), 0.0)
    if w.min() < -psd_tolerance * max(top, 1.0):
        raise ParameterDomainError(f"state is not positive semidefinite (eigenvalue {w.min():.3e})")
    w = np.where(w > eigen_clip * top, w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def _block_overlap(a, b, psd_tolerance, eigen_clip):
    if np.abs(a).max() == 0.0 or np.abs(b).max() == 0.0:
        return 0.0
    s0 = _sqrt_psd(a, psd_tolerance, eigen_clip)
    s1 = _sqrt_psd(b, psd_tolerance, eigen_clip)
    return scipy.linalg.svdvals(s0 @ s1).sum()


def _sector_fidelity(rho0, rho1, psd_tolerance, eigen_clip):
    if rho0.cutoff != rho1.cutoff:
        raise ParameterDomainError(f"sector cutoffs differ: {rho0.cutoff} vs {rho1.cutoff}")
    total = 0.0
    for delta, (_, a) in rho0.blocks.items():
        if delta in rho1.blocks:
            total += _block_overlap(a, rho1.blocks[delta][1], psd_tolerance, eigen_clip)
    return total


def _common_cutoff(rho0, rho1):
    if rho0.n_modes != rho1.n_modes:
        raise ParameterDomainError("states have different mode counts")
    cutoff = max(rho0.cutoff, rho1.cutoff)
    return (
        _pad(rho0.matrix, rho0.cutoff, cutoff, rho0.n_modes),
        _pad(rho1.matrix, rho1.cutoff, cutoff, rho1.n_modes),
    )


def fidelity(rho0, rho1, clip=True, psd_tolerance=None, eigen_clip=None):
    """Uhlmann fidelity ``Tr sqrt(sqrt(rho0) rho1 sqrt(rho0))``.

    Evaluated as the nuclear norm of ``sqrt(rho0) sqrt(rho1)`` on each block of
    the joint sparsity pattern; phase-covariant outputs split into
    photon-number sectors. Number-basis states of different cutoffs are
    zero-padded to the larger one.
    """
    psd_tolerance = ORACLE["psd_tolerance"] if psd_tolerance is None else psd_tolerance
    eigen_clip = ORACLE["eigen_clip"] if eigen_clip is None else eigen_clip
    if isinstance(rho0, SectorDensityMatrix) and isinstance(rho1, SectorDensityMatrix):
        total = _sector_fidelity(rho0, rho1, psd_tolerance, eigen_clip)
        return min(max(total, 0.0), 1.0) if clip else float(total)
    if isinstance(rho0, SectorDensityMatrix):
        rho0 = rho0.to_fock()
    if isinstance(rho1, SectorDensityMatrix):
        rho1 = rho1.to_fock()
    if isinstance(rho0, FockDensityMatrix) and isinstance(rho1, FockDensityMatrix):
        a, b = _common_cutoff(rho0, rho1)
    else:
        a = rho0.matrix if isinstance(rho0, FockDensityMatrix) else np.asarray(rho0)
        b = rho1.matrix if isinstance(rho1, FockDensityMatrix) else np.asarray(rho1)
    if a.shape != b.shape:
        raise ParameterDomainError(f"state shapes differ: {a.shape} vs {b.shape}")
    magnitude = np.abs(a) + np.abs(b)
    pattern = scipy.sparse.csr_matrix(magnitude > 1e-14 * magnitude.max())
    n_blocks, labels = connected_components(pattern, directed=False)
    total = 0.0
    for label in range(n_blocks):
        idx = np.flatnonzero(labels == label)
        sub = np.ix_(idx, idx)
        total += _block_overlap(a[sub], b[sub], psd_tolerance, eigen_clip)
    return min(max(total, 0.0), 1.0) if clip else float(total)


def channel_family(spec, kappa, cutoff=None):
    """``n_b -> channel output`` for a fixed pure source.

    A given ``cutoff`` is fixed; without one the single-mode cutoff grows as
    needed and the two-mode output is kept in photon-difference sectors.
    """
    if spec.kind is SourceKind.TMSV:
        n_s = spec.n_squeeze

        def family(n_b):
            return tmsv_output_sectors(n_s, ChannelParams(kappa, n_b), cutoff=cutoff)

        return family

    source = fock_from_source(spec, cutoff=cutoff, max_cutoff=cutoff)
    max_cutoff = None if cutoff is None else source.cutoff

    def family(n_b):
        return apply_channel_fock(source, ChannelParams(kappa, n_b), max_cutoff=max_cutoff)

    return family


def qfi_finite_diff(family, n_b, eps=None, noise_floor=None):
    """``8 (1 - F(rho(n_b - h/2), rho(n_b + h/2))) / h**2`` with one Richardson step.

    Without ``eps`` the step starts at ``fd_relative_step * n_b`` and grows
    by decades, up to ``fd_max_relative_step * n_b``, while the infidelity
    is too small to resolve against rounding in the fidelity.
    """
    if n_b <= 0:
        raise ParameterDomainError("Fisher information about n_b diverges at n_b = 0")
    adaptive = eps is None
    if adaptive:
        eps = max(NUMERICS["fd_relative_step"] * n_b, NUMERICS["fd_min_step"])
    noise_floor = NUMERICS["fd_noise_floor"] if noise_floor is None else noise_floor
    if eps >= n_b:
        raise ParameterDomainError(f"step {eps} must be smaller than n_b = {n_b}")
    infidelities = {}

    def infidelity(h):
        if h not in infidelities:
            infidelities[h] = 1.0 - fidelity(
                family(n_b - 0.5 * h), family(n_b + 0.5 * h), clip=False
            )
        return infidelities[h]

    if adaptive:
        largest = min(NUMERICS["fd_max_relative_step"] * n_b, 0.25 * n_b)
        while infidelity(eps) < NUMERICS["fd_min_infidelity"] and eps < largest:
            eps = min(10.0 * eps, largest)
        log(f"fidelity finite-difference step {eps:.3e} at n_b={n_b}", level="debug")

    value, error = richardson(lambda h: 8.0 * infidelity(h) / h ** 2, eps)
    flags = ()
    if min(infidelity(eps), infidelity(2.0 * eps)) < noise_floor:
        log(
            f"finite-difference step {eps:.3e} is at the fidelity noise floor for n_b={n_b}",
            level="warning",
        )
        flags = ("noise-floor",)
    return FisherResult(
        max(value, 0.0), Method.FOCK_ORACLE, dict(n_b=n_b, eps=eps), error=error, flags=flags
    )
