"""Shared random-object factories and closed-form references for the tests."""

from __future__ import annotations

import math

import numpy as np

from hdsteer import (
    Assemblage,
    BipartiteState,
    DensityMatrix,
    KrausChannel,
    MeasurementSet,
    haar_unitary,
    steer,
)

SQRT2 = math.sqrt(2.0)


def rand_density(rng: np.random.Generator, dim: int) -> DensityMatrix:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    mat = g @ g.conj().T
    return DensityMatrix(mat / np.trace(mat).real)


def rand_bipartite(rng: np.random.Generator, dim_a: int, dim_b: int) -> BipartiteState:
    return BipartiteState(dim_a, dim_b, rand_density(rng, dim_a * dim_b))


def rand_pure(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def rand_psd(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return g @ g.conj().T


def rand_povm(rng: np.random.Generator, dim: int, outcomes: int) -> tuple[np.ndarray, ...]:
    blocks = [rand_psd(rng, dim) for _ in range(outcomes)]
    total = sum(blocks)
    w, v = np.linalg.eigh(total)
    whiten = (v * (1.0 / np.sqrt(w))) @ v.conj().T
    return tuple(whiten @ b @ whiten for b in blocks)


def rand_pvm(rng: np.random.Generator, dim: int) -> tuple[np.ndarray, ...]:
    u = haar_unitary(dim, rng)
    return tuple(np.outer(u[:, a], u[:, a].conj()) for a in range(dim))


def rand_measurements(
    rng: np.random.Generator, dim: int, n_inputs: int, outcomes: int
) -> MeasurementSet:
    return MeasurementSet(dim, tuple(rand_povm(rng, dim, outcomes) for _ in range(n_inputs)))


def rand_pvm_measurements(rng: np.random.Generator, dim: int, n_inputs: int) -> MeasurementSet:
    return MeasurementSet(dim, tuple(rand_pvm(rng, dim) for _ in range(n_inputs)))


def rand_separable(
    rng: np.random.Generator, dim_a: int, dim_b: int, terms: int = 4
) -> BipartiteState:
    weights = rng.dirichlet(np.ones(terms))
    mat = sum(
        w * np.kron(rand_density(rng, dim_a).matrix, rand_density(rng, dim_b).matrix)
        for w in weights
    )
    return BipartiteState.from_matrix(mat, dim_a, dim_b)


def rand_assemblage(
    rng: np.random.Generator, dim: int, n_inputs: int = 2, outcomes: int = 2
) -> Assemblage:
    state = rand_bipartite(rng, dim, dim)
    return steer(state, rand_measurements(rng, dim, n_inputs, outcomes))


def embedded_assemblage(
    rng: np.random.Generator, support_dim: int, full_dim: int, n_inputs: int = 2, outcomes: int = 2
) -> tuple[Assemblage, np.ndarray]:
    """Assemblage on ``full_dim`` whose marginal has rank ``support_dim``."""
    small = rand_assemblage(rng, support_dim, n_inputs, outcomes)
    isometry = haar_unitary(full_dim, rng)[:, :support_dim]
    rows = tuple(
        tuple(isometry @ op @ isometry.conj().T for op in members) for members in small.inputs
    )
    return Assemblage(full_dim, rows), isometry


def rand_channel(rng: np.random.Generator, dim_in: int, dim_out: int, n_kraus: int) -> KrausChannel:
    ops = [rng.normal(size=(dim_out, dim_in)) + 1j * rng.normal(size=(dim_out, dim_in)) for _ in range(n_kraus)]
    total = sum(op.conj().T @ op for op in ops)
    w, v = np.linalg.eigh(total)
    whiten = (v * (1.0 / np.sqrt(w))) @ v.conj().T
    return KrausChannel(dim_in, dim_out, tuple(op @ whiten for op in ops))


def max_dev(a_rows, b_rows) -> float:
    """Largest entrywise deviation between two input-indexed operator families."""
    return max(
        float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
        for row_a, row_b in zip(a_rows, b_rows)
        for a, b in zip(row_a, row_b)
    )


# Closed forms for the qubit unbiased pair on the isotropic family (free-set
# boundary at visibility 1/sqrt(2); linear above it, reaching 1 at eta = 1).
def qubit_mub_weight(eta: float) -> float:
    return max(0.0, (SQRT2 * eta - 1.0) / (SQRT2 - 1.0))


# PPT weight of the 2x2 isotropic family (twirling argument; boundary 1/3).
def qubit_iso_entanglement_weight(eta: float) -> float:
    return max(0.0, (3.0 * eta - 1.0) / 2.0)
