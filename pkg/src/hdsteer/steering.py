"""Steering maps and the assemblage/measurement correspondence.

An assemblage is the family of subnormalized states Bob holds after Alice
measures her half of a shared state.  Conjugating by the square root of the
marginal turns an assemblage into a measurement set and back; the maps are
mutual inverses once rank-deficient marginals are restricted to their
support.
"""

from __future__ import annotations

from dataclasses import InitVar, dataclass
from typing import NamedTuple

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
    haar_unitary,
    hermitize,
    matrix_from_json,
    matrix_to_json,
    min_eigenvalue,
    projector,
    psd_pinv_sqrt,
    psd_sqrt,
    require_hermitian,
    require_psd,
)

__all__ = [
    "TOL_NOSIGNALING",
    "Assemblage",
    "MeasurementsFromAssemblage",
    "NoisyPvmFamily",
    "steer",
    "assemblage_to_measurements",
    "measurements_to_assemblage",
    "restrict_assemblage",
    "add_white_noise",
    "isotropic",
    "max_entangled_state",
    "max_entangled_vector",
]

TOL_NOSIGNALING = 1e-9


@dataclass(frozen=True, eq=False)
class Assemblage:
    """Family ``{sigma_{a|x}}`` of subnormalized states with a common marginal.

    ``inputs[x][a]`` is the (PSD, subnormalized) operator for outcome ``a``
    of input ``x``.  The per-input sums must agree (no-signaling) and carry
    unit trace.
    """

    dim: int
    inputs: tuple[tuple[np.ndarray, ...], ...]
    tol_psd: InitVar[float] = TOL_PSD
    tol_nosignaling: InitVar[float] = TOL_NOSIGNALING
    tol_trace: InitVar[float] = TOL_NOSIGNALING

    def __post_init__(self, tol_psd: float, tol_nosignaling: float, tol_trace: float) -> None:
        if not self.inputs:
            raise ValidationError("assemblage needs at least one input")
        cleaned = []
        sums = []
        for x, members in enumerate(self.inputs):
            if not members:
                raise ValidationError(f"input {x} has no outcomes")
            ops = []
            for a, op in enumerate(members):
                mat = as_matrix(op)
                if mat.shape != (self.dim, self.dim):
                    raise ValidationError(
                        f"member ({a}|{x}) has shape {mat.shape}, expected {(self.dim, self.dim)}"
                    )
                require_hermitian(mat, 10 * tol_psd, f"member ({a}|{x})")
                require_psd(mat, tol_psd, f"member ({a}|{x})")
                ops.append(mat)
            total = sum(ops)
            tr = complex(np.trace(total))
            if abs(tr - 1.0) > tol_trace:
                raise ValidationError(f"input {x} has total trace {tr}, expected 1")
            sums.append(total)
            cleaned.append(tuple(ops))
        for x in range(1, len(sums)):
            dev = float(np.max(np.abs(sums[x] - sums[0])))
            if dev > tol_nosignaling:
                raise ValidationError(
                    f"no-signaling violated between inputs 0 and {x} (deviation {dev:.3e})"
                )
        object.__setattr__(self, "inputs", tuple(cleaned))

    @property
    def n_inputs(self) -> int:
        return len(self.inputs)

    @property
    def outcome_counts(self) -> tuple[int, ...]:
        return tuple(len(members) for members in self.inputs)

    def marginal(self) -> np.ndarray:
        """Common reduced state ``sum_a sigma_{a|x}`` (averaged over inputs)."""
        total = sum(sum(members) for members in self.inputs)
        return hermitize(total / self.n_inputs)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "inputs": [[matrix_to_json(op) for op in members] for members in self.inputs],
        }

    @classmethod
    def from_json(cls, obj: dict, **tols) -> "Assemblage":
        try:
            dim = int(obj["dim"])
            inputs = obj["inputs"]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed assemblage payload: {exc}") from exc
        members = tuple(tuple(matrix_from_json(op) for op in row) for row in inputs)
        return cls(dim, members, **tols)


def max_entangled_vector(dim: int) -> np.ndarray:
    vec = np.zeros(dim * dim, dtype=complex)
    vec[:: dim + 1] = 1.0 / np.sqrt(dim)
    return vec


def max_entangled_state(dim: int) -> BipartiteState:
    """|Phi+><Phi+| on ``C^dim (x) C^dim``."""
    return BipartiteState.from_matrix(projector(max_entangled_vector(dim)), dim, dim)


def isotropic(dim: int, eta: float) -> BipartiteState:
    """Visibility-``eta`` mixture of |Phi+><Phi+| with white noise."""
    if not 0.0 <= eta <= 1.0:
        raise ValidationError(f"visibility must lie in [0, 1], got {eta}")
    mat = eta * projector(max_entangled_vector(dim)) + (1.0 - eta) * np.eye(dim * dim) / dim**2
    return BipartiteState.from_matrix(mat, dim, dim)


def steer(state: BipartiteState, measurements: MeasurementSet, **tols) -> Assemblage:
    """Remote preparation: ``sigma_{a|x} = Tr_A[(M_{a|x} (x) 1) rho]``."""
    if measurements.dim != state.dim_a:
        raise ValidationError(
            f"measurement dimension {measurements.dim} != dim_a {state.dim_a}"
        )
    r = state.matrix.reshape(state.dim_a, state.dim_b, state.dim_a, state.dim_b)
    rows = tuple(
        tuple(hermitize(np.einsum("ij,jkil->kl", eff, r)) for eff in povm)
        for povm in measurements.inputs
    )
    return Assemblage(state.dim_b, rows, **tols)


class MeasurementsFromAssemblage(NamedTuple):
    """Result of mapping an assemblage to measurements on the marginal support.

    ``isometry`` embeds the support back into the original space; it is the
    identity whenever the marginal has full rank.
    """

    measurements: MeasurementSet
    marginal: DensityMatrix
    isometry: np.ndarray


def assemblage_to_measurements(
    assemblage: Assemblage, *, rank_tol: float = RANK_TOL
) -> MeasurementsFromAssemblage:
    """Conjugate by the inverse-square-root marginal: ``M = rho_B^{-1/2} sigma rho_B^{-1/2}``.

    Rank-deficient marginals are restricted to their support first, so the
    returned measurements and marginal live on the support subspace.
    """
    rho_b = assemblage.marginal()
    dim = assemblage.dim
    w, v = np.linalg.eigh(rho_b)
    keep = w > rank_tol
    rank = int(np.count_nonzero(keep))
    if rank == 0:
        raise ValidationError("assemblage marginal has numerically empty support")
    if rank == dim:
        inv_sqrt, _ = psd_pinv_sqrt(rho_b, rank_tol=rank_tol)
        isometry = np.eye(dim, dtype=complex)
        effects = tuple(
            tuple(hermitize(inv_sqrt @ op @ inv_sqrt) for op in members)
            for members in assemblage.inputs
        )
        marginal = DensityMatrix(rho_b)
    else:
        isometry = v[:, keep]
        scale = 1.0 / np.sqrt(w[keep])
        lift = isometry * scale  # columns v_i / sqrt(w_i)
        effects = tuple(
            tuple(hermitize(dagger(lift) @ op @ lift) for op in members)
            for members in assemblage.inputs
        )
        marginal = DensityMatrix(hermitize(dagger(isometry) @ rho_b @ isometry))
    return MeasurementsFromAssemblage(
        MeasurementSet(rank, effects), marginal, isometry
    )


def measurements_to_assemblage(
    measurements: MeasurementSet, marginal: DensityMatrix, *, rank_tol: float = RANK_TOL, **tols
) -> Assemblage:
    """Inverse map ``sigma = rho_B^{1/2} M rho_B^{1/2}`` for a full-rank marginal."""
    if marginal.dim != measurements.dim:
        raise ValidationError(
            f"marginal dimension {marginal.dim} != measurement dimension {measurements.dim}"
        )
    if min_eigenvalue(marginal.matrix) <= rank_tol:
        raise ValidationError(
            "marginal is rank deficient; restrict to its support before mapping"
        )
    s = psd_sqrt(marginal.matrix)
    rows = tuple(
        tuple(hermitize(s @ eff @ s) for eff in povm) for povm in measurements.inputs
    )
    return Assemblage(measurements.dim, rows, **tols)


def restrict_assemblage(assemblage: Assemblage, isometry: np.ndarray, **tols) -> Assemblage:
    """Compress an assemblage onto the subspace spanned by the isometry columns."""
    iso = as_matrix(isometry)
    if iso.shape[0] != assemblage.dim:
        raise ValidationError("isometry rows must match the assemblage dimension")
    rows = tuple(
        tuple(hermitize(dagger(iso) @ op @ iso) for op in members)
        for members in assemblage.inputs
    )
    return Assemblage(iso.shape[1], rows, **tols)


def add_white_noise(measurements: MeasurementSet, eta: float) -> MeasurementSet:
    """Mix every effect with trace-proportional white noise at visibility ``eta``.

    The identity share per effect is ``Tr(M) I / d``, which preserves
    completeness for arbitrary POVMs and reduces to ``I / d`` for rank-1
    projective measurements.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValidationError(f"visibility must lie in [0, 1], got {eta}")
    d = measurements.dim
    eye = np.eye(d)
    rows = tuple(
        tuple(eta * eff + (1.0 - eta) * (np.trace(eff).real / d) * eye for eff in povm)
        for povm in measurements.inputs
    )
    return MeasurementSet(d, rows)


@dataclass(frozen=True, eq=False)
class NoisyPvmFamily:
    """Finite sample of the noisy projective-measurement family.

    Each generator ``U`` defines the rank-1 PVM ``{U |a><a| U^dag}`` mixed
    with white noise at the family visibility.  The continuous family is
    represented by such samples together with the closed-form thresholds in
    :mod:`hdsteer.witnesses`.
    """

    dim: int
    visibility: float
    generators: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if not 0.0 <= self.visibility <= 1.0:
            raise ValidationError(f"visibility must lie in [0, 1], got {self.visibility}")
        if not self.generators:
            raise ValidationError("family needs at least one generator unitary")
        checked = []
        for u in self.generators:
            mat = as_matrix(u)
            if mat.shape != (self.dim, self.dim):
                raise ValidationError("generator has wrong shape")
            dev = float(np.max(np.abs(mat @ dagger(mat) - np.eye(self.dim))))
            if dev > 1e-9:
                raise ValidationError(f"generator is not unitary (deviation {dev:.3e})")
            checked.append(mat)
        object.__setattr__(self, "generators", tuple(checked))

    def povm(self, unitary: np.ndarray) -> tuple[np.ndarray, ...]:
        u = as_matrix(unitary)
        eye = np.eye(self.dim)
        return tuple(
            self.visibility * projector(u[:, a]) + (1.0 - self.visibility) * eye / self.dim
            for a in range(self.dim)
        )

    def measurement_set(self) -> MeasurementSet:
        return MeasurementSet(self.dim, tuple(self.povm(u) for u in self.generators))

    @classmethod
    def haar(
        cls, dim: int, count: int, visibility: float, rng: np.random.Generator
    ) -> "NoisyPvmFamily":
        if count < 1:
            raise ValidationError("count must be at least 1")
        return cls(dim, visibility, tuple(haar_unitary(dim, rng) for _ in range(count)))
