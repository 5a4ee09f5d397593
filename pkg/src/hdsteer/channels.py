"""Kraus channels, generalized channel-state duality, and rank certificates.

The duality pairs a channel with the state obtained by acting on one half of
a purification whose reference marginal is a chosen full-rank ``sigma``; the
inverse direction rebuilds Kraus operators from any pure-state decomposition
of the dual state.  Square-root factors attached to ``sigma`` are taken in
an eigenbasis of ``sigma`` so that trace preservation and the marginal
constraint hold exactly for complex marginals; for real ``sigma`` (such as
``I/d``) this coincides with the plain transposed-factor construction.
"""

from __future__ import annotations

from dataclasses import InitVar, dataclass

import numpy as np

from .qcore import (
    RANK_TOL,
    TOL_PSD,
    BipartiteState,
    DensityMatrix,
    MeasurementSet,
    ValidationError,
    as_matrix,
    dagger,
    hermitize,
    matrix_from_json,
    matrix_to_json,
    min_eigenvalue,
    psd_pinv_sqrt,
    psd_sqrt,
    rank_with_tol,
)
from .steering import steer
from .witnesses import CERT_MARGIN, GhdsWitness, mub_measurements, witness_bound, witness_value

__all__ = [
    "TOL_CHANNEL",
    "KrausChannel",
    "ChoiState",
    "PebCertificate",
    "PibWitnessCheck",
    "apply",
    "dual_apply",
    "choi_of",
    "state_to_channel",
    "peb_certificate",
    "pib_witness_check",
    "depolarizing",
]

TOL_CHANNEL = 1e-9


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Completely positive trace-preserving map in Kraus form."""

    dim_in: int
    dim_out: int
    kraus_ops: tuple[np.ndarray, ...]
    tol_completeness: InitVar[float] = TOL_CHANNEL

    def __post_init__(self, tol_completeness: float) -> None:
        if not self.kraus_ops:
            raise ValidationError("channel needs at least one Kraus operator")
        ops = []
        for i, op in enumerate(self.kraus_ops):
            mat = as_matrix(op)
            if mat.shape != (self.dim_out, self.dim_in):
                raise ValidationError(
                    f"Kraus operator {i} has shape {mat.shape}, expected "
                    f"{(self.dim_out, self.dim_in)}"
                )
            ops.append(mat)
        total = sum(dagger(k) @ k for k in ops)
        dev = float(np.max(np.abs(total - np.eye(self.dim_in))))
        if dev > tol_completeness:
            raise ValidationError(f"Kraus completeness violated (deviation {dev:.3e})")
        object.__setattr__(self, "kraus_ops", tuple(ops))

    def to_json(self) -> dict:
        return {
            "dim_in": self.dim_in,
            "dim_out": self.dim_out,
            "kraus": [matrix_to_json(k) for k in self.kraus_ops],
        }

    @classmethod
    def from_json(cls, obj: dict, **tols) -> "KrausChannel":
        try:
            dim_in, dim_out = int(obj["dim_in"]), int(obj["dim_out"])
            kraus = tuple(matrix_from_json(k) for k in obj["kraus"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed channel payload: {exc}") from exc
        return cls(dim_in, dim_out, kraus, **tols)


@dataclass(frozen=True, eq=False)
class ChoiState:
    """Dual state of a channel with a declared reference marginal.

    The first factor carries the channel output, the second the reference
    system; ``Tr_A`` of the matrix must reproduce ``marginal``.
    """

    dim_out: int
    dim_in: int
    matrix: np.ndarray
    marginal: DensityMatrix
    tol: InitVar[float] = TOL_CHANNEL

    def __post_init__(self, tol: float) -> None:
        mat = as_matrix(self.matrix)
        d = self.dim_out * self.dim_in
        if mat.shape != (d, d):
            raise ValidationError(f"dual-state matrix has shape {mat.shape}, expected {(d, d)}")
        if min_eigenvalue(mat) < -TOL_PSD:
            raise ValidationError("dual state is not PSD")
        if abs(complex(np.trace(mat)) - 1.0) > tol:
            raise ValidationError("dual state trace is not 1")
        reduced = np.einsum(
            "ijil->jl", mat.reshape(self.dim_out, self.dim_in, self.dim_out, self.dim_in)
        )
        dev = float(np.max(np.abs(reduced - self.marginal.matrix)))
        if dev > tol:
            raise ValidationError(f"declared marginal is inconsistent (deviation {dev:.3e})")
        object.__setattr__(self, "matrix", mat)

    def bipartite(self) -> BipartiteState:
        return BipartiteState.from_matrix(self.matrix, self.dim_out, self.dim_in)


@dataclass(frozen=True)
class PebCertificate:
    """One-sided rank certificate: the channel is ``n``-partially entanglement
    breaking for ``n = max_rank`` of the supplied Kraus decomposition."""

    n: int
    kraus_ranks: tuple[int, ...]
    max_rank: int

    def __post_init__(self) -> None:
        if self.max_rank != max(self.kraus_ranks):
            raise ValidationError("max_rank must equal the maximum of kraus_ranks")
        if self.n != self.max_rank:
            raise ValidationError("certified level must equal max_rank")

    def to_json(self) -> dict:
        return {"n": self.n, "kraus_ranks": list(self.kraus_ranks), "max_rank": self.max_rank}


@dataclass(frozen=True)
class PibWitnessCheck:
    """Witness refutation record for incompatibility-breaking at level ``n``.

    ``refuted=True`` certifies the channel is not ``n``-PIB; ``False`` is
    inconclusive.
    """

    level: int
    refuted: bool
    witness_value: float
    bound: float

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "refuted": self.refuted,
            "witness_value": self.witness_value,
            "bound": self.bound,
        }


def apply(channel: KrausChannel, rho: DensityMatrix) -> DensityMatrix:
    """Schroedinger picture: ``sum_k K rho K^dag``."""
    if rho.dim != channel.dim_in:
        raise ValidationError(f"input dimension {rho.dim} != channel dim_in {channel.dim_in}")
    out = sum(k @ rho.matrix @ dagger(k) for k in channel.kraus_ops)
    return DensityMatrix(hermitize(out))


def dual_apply(channel: KrausChannel, measurements: MeasurementSet) -> MeasurementSet:
    """Heisenberg picture on effects: ``sum_k K^dag M K``; preserves completeness."""
    if measurements.dim != channel.dim_out:
        raise ValidationError(
            f"measurement dimension {measurements.dim} != channel dim_out {channel.dim_out}"
        )
    rows = tuple(
        tuple(hermitize(sum(dagger(k) @ eff @ k for k in channel.kraus_ops)) for eff in povm)
        for povm in measurements.inputs
    )
    return MeasurementSet(channel.dim_in, rows)


def _require_full_rank(sigma: DensityMatrix, rank_tol: float) -> None:
    if min_eigenvalue(sigma.matrix) <= rank_tol:
        raise ValidationError("reference marginal must have full rank")


def choi_of(channel: KrausChannel, sigma: DensityMatrix, *, rank_tol: float = RANK_TOL) -> ChoiState:
    """Dual state with reference marginal ``sigma``; ``sigma = I/d`` gives the
    standard normalized dual state."""
    if sigma.dim != channel.dim_in:
        raise ValidationError(f"marginal dimension {sigma.dim} != dim_in {channel.dim_in}")
    _require_full_rank(sigma, rank_tol)
    d = channel.dim_out * channel.dim_in
    unnormalized = np.zeros((d, d), dtype=complex)
    for k in channel.kraus_ops:
        vec = k.reshape(-1)
        unnormalized += np.outer(vec, np.conj(vec))
    sqrt_sigma = psd_sqrt(sigma.matrix)
    dress = np.kron(np.eye(channel.dim_out), sqrt_sigma)
    matrix = hermitize(dress @ unnormalized @ dress)
    return ChoiState(channel.dim_out, channel.dim_in, matrix, sigma)


def state_to_channel(
    rho: BipartiteState,
    sigma: DensityMatrix,
    decomposition: list[np.ndarray] | None = None,
    *,
    rank_tol: float = RANK_TOL,
    tol_marginal: float = 1e-8,
    eig_cutoff: float = 1e-12,
) -> KrausChannel:
    """Rebuild the channel dual to ``rho`` for reference marginal ``sigma``.

    Each pure component ``|psi>`` of ``rho`` (eigenvectors by default, or an
    explicit ``decomposition`` of unnormalized vectors with
    ``sum |psi><psi| = rho``) contributes one Kraus operator
    ``K = Psi (sigma^T)^{-1/2}`` where ``Psi`` is the component reshaped to
    ``dim_out x dim_in``.  The rank of each ``K`` equals the Schmidt rank of
    its component.
    """
    d_out, d_in = rho.dim_a, rho.dim_b
    if sigma.dim != d_in:
        raise ValidationError(f"marginal dimension {sigma.dim} != dim_b {d_in}")
    _require_full_rank(sigma, rank_tol)
    reduced = np.einsum("ijil->jl", rho.matrix.reshape(d_out, d_in, d_out, d_in))
    dev = float(np.max(np.abs(reduced - sigma.matrix)))
    if dev > tol_marginal:
        raise ValidationError(
            f"Tr_A(rho) deviates from sigma by {dev:.3e} (> {tol_marginal:.1e})"
        )

    if decomposition is None:
        w, v = np.linalg.eigh(rho.matrix)
        vectors = [np.sqrt(w[i]) * v[:, i] for i in range(len(w)) if w[i] > eig_cutoff]
    else:
        vectors = [np.asarray(vec, dtype=complex).reshape(-1) for vec in decomposition]
        recon = sum(np.outer(vec, np.conj(vec)) for vec in vectors)
        dev = float(np.max(np.abs(recon - rho.matrix)))
        if dev > tol_marginal:
            raise ValidationError(
                f"decomposition does not reproduce the state (deviation {dev:.3e})"
            )
    if not vectors:
        raise ValidationError("state has numerically empty spectrum")

    inv_sqrt, _ = psd_pinv_sqrt(sigma.matrix, rank_tol=rank_tol)
    inv_sqrt_t = np.conj(inv_sqrt)  # inverse square root of sigma^T
    kraus = tuple(vec.reshape(d_out, d_in) @ inv_sqrt_t for vec in vectors)
    return KrausChannel(d_in, d_out, kraus, tol_completeness=1e-8)


def peb_certificate(channel: KrausChannel, *, rank_tol: float | None = None) -> PebCertificate:
    """Ranks of the supplied Kraus decomposition.

    ``max_rank = n`` certifies the channel is ``n``-PEB; the absence of a
    lower-rank decomposition is not decided.  To certify through a dual
    state, rebuild the channel with :func:`state_to_channel` and an explicit
    decomposition first.
    """
    ranks = tuple(rank_with_tol(k, rank_tol) for k in channel.kraus_ops)
    top = max(ranks)
    return PebCertificate(top, ranks, top)


def pib_witness_check(
    channel: KrausChannel,
    sigma: DensityMatrix,
    n: int,
    *,
    margin: float = CERT_MARGIN,
) -> PibWitnessCheck:
    """Steer the unbiased-pair witness on the dual state and test level ``n``.

    A violation certifies that some measurement set is mapped outside the
    ``n``-simulable set, so the channel is not ``n``-PIB.
    """
    if channel.dim_in != channel.dim_out:
        raise ValidationError("witness check requires a square channel")
    d = channel.dim_in
    if not 1 <= n <= d:
        raise ValidationError(f"level n must satisfy 1 <= n <= {d}, got {n}")
    choi = choi_of(channel, sigma)
    assemblage = steer(choi.bipartite(), mub_measurements(d))
    value = witness_value(assemblage, GhdsWitness(d))
    bound = witness_bound(d, n)
    return PibWitnessCheck(n, value > bound + margin, value, bound)


def depolarizing(dim: int, eta: float) -> KrausChannel:
    """``rho -> eta rho + (1 - eta) I/d``."""
    if not 0.0 <= eta <= 1.0:
        raise ValidationError(f"visibility must lie in [0, 1], got {eta}")
    ops: list[np.ndarray] = []
    if eta > 0.0:
        ops.append(np.sqrt(eta) * np.eye(dim, dtype=complex))
    if eta < 1.0:
        weight = np.sqrt((1.0 - eta) / dim)
        for i in range(dim):
            for j in range(dim):
                op = np.zeros((dim, dim), dtype=complex)
                op[i, j] = weight
                ops.append(op)
    return KrausChannel(dim, dim, tuple(ops))
