"""Dense complex linear algebra primitives and validated quantum objects.

All operators are dense ``numpy`` arrays of ``complex128``.  Bipartite
objects use a fixed A-major index convention: the composite basis vector
``|i>_A |j>_B`` sits at index ``i * dim_b + j``, which is what ``np.kron``
produces.  Validation tolerances are module constants and can be overridden
per call (or per construction via keyword arguments).

The JSON wire format for a single matrix is::

    {"rows": r, "cols": c, "data": [[re, im], ...]}

with ``data`` holding ``r * c`` re/im pairs in row-major order.
"""

from __future__ import annotations

from dataclasses import InitVar, dataclass
from typing import Sequence

import numpy as np
from scipy.stats import unitary_group

__all__ = [
    "TOL_HERM",
    "TOL_PSD",
    "TOL_TRACE",
    "TOL_COMPLETENESS",
    "TOL_UNITARY",
    "RANK_TOL",
    "ValidationError",
    "DensityMatrix",
    "BipartiteState",
    "MeasurementSet",
    "as_matrix",
    "dagger",
    "hermitize",
    "projector",
    "min_eigenvalue",
    "require_hermitian",
    "require_psd",
    "tensor",
    "partial_trace",
    "psd_sqrt",
    "psd_pinv_sqrt",
    "transpose_in_basis",
    "rank_with_tol",
    "fourier_mub_pair",
    "haar_unitary",
    "matrix_to_json",
    "matrix_from_json",
]

# Default validation tolerances.
TOL_HERM = 1e-10
TOL_PSD = 1e-9
TOL_TRACE = 1e-10
TOL_COMPLETENESS = 1e-9
TOL_UNITARY = 1e-9
RANK_TOL = 1e-8


class ValidationError(ValueError):
    """An object failed one of its structural invariants."""


def as_matrix(value) -> np.ndarray:
    """Coerce to a 2-D complex array and reject non-finite entries."""
    mat = np.asarray(value, dtype=complex)
    if mat.ndim != 2:
        raise ValidationError(f"expected a matrix, got array of ndim {mat.ndim}")
    if not np.all(np.isfinite(mat.real)) or not np.all(np.isfinite(mat.imag)):
        raise ValidationError("matrix has non-finite entries")
    return mat


def dagger(mat: np.ndarray) -> np.ndarray:
    return np.conj(mat.T)


def hermitize(mat: np.ndarray) -> np.ndarray:
    """Project onto the Hermitian part (cheap cleanup after round-off)."""
    return 0.5 * (mat + dagger(mat))


def projector(vec: Sequence[complex]) -> np.ndarray:
    """Rank-1 projector |v><v| for a (normalized) state vector."""
    v = np.asarray(vec, dtype=complex).reshape(-1)
    return np.outer(v, np.conj(v))


def require_hermitian(mat: np.ndarray, tol: float = TOL_HERM, what: str = "matrix") -> None:
    dev = float(np.max(np.abs(mat - dagger(mat)))) if mat.size else 0.0
    if dev > tol:
        raise ValidationError(f"{what} is not Hermitian (deviation {dev:.3e} > {tol:.1e})")


def min_eigenvalue(mat: np.ndarray) -> float:
    """Smallest eigenvalue of a Hermitian matrix."""
    return float(np.linalg.eigvalsh(hermitize(mat))[0])


def require_psd(mat: np.ndarray, tol: float = TOL_PSD, what: str = "matrix") -> None:
    lo = min_eigenvalue(mat)
    if lo < -tol:
        raise ValidationError(f"{what} is not PSD (min eigenvalue {lo:.3e} < -{tol:.1e})")


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product in the A-major composite index convention."""
    return np.kron(as_matrix(a), as_matrix(b))


def psd_sqrt(mat: np.ndarray, *, tol_herm: float = TOL_HERM, tol_psd: float = TOL_PSD) -> np.ndarray:
    """Hermitian PSD square root.

    Eigenvalues below ``tol_psd`` are clamped to zero; eigenvalues below
    ``-tol_psd`` raise.  The result ``S`` satisfies ``S @ S == mat`` up to
    the clamping scale.
    """
    m = as_matrix(mat)
    require_hermitian(m, tol_herm, "psd_sqrt input")
    w, v = np.linalg.eigh(hermitize(m))
    if w[0] < -tol_psd:
        raise ValidationError(f"psd_sqrt input is not PSD (min eigenvalue {w[0]:.3e})")
    w = np.where(w < tol_psd, 0.0, w)
    return hermitize((v * np.sqrt(w)) @ dagger(v))


def psd_pinv_sqrt(
    mat: np.ndarray,
    *,
    rank_tol: float = RANK_TOL,
    tol_herm: float = TOL_HERM,
) -> tuple[np.ndarray, np.ndarray]:
    """Pseudo-inverse square root on the support of a Hermitian PSD matrix.

    Eigenvalues above ``rank_tol`` are inverted, the rest are zeroed.
    Returns ``(pinv_sqrt, support_projector)``.
    """
    m = as_matrix(mat)
    require_hermitian(m, tol_herm, "psd_pinv_sqrt input")
    w, v = np.linalg.eigh(hermitize(m))
    keep = w > rank_tol
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / np.sqrt(w[keep])
    pinv_sqrt = hermitize((v * inv) @ dagger(v))
    support = hermitize((v[:, keep]) @ dagger(v[:, keep]))
    return pinv_sqrt, support


def transpose_in_basis(mat: np.ndarray, basis: np.ndarray, *, tol_unitary: float = TOL_UNITARY) -> np.ndarray:
    """Transpose of an operator relative to the basis given by the columns of ``basis``.

    For ``basis = I`` this is the plain computational-basis transpose.  The
    operation is an involution and preserves the spectrum.
    """
    m = as_matrix(mat)
    u = as_matrix(basis)
    if u.shape != m.shape or u.shape[0] != u.shape[1]:
        raise ValidationError("basis must be square and match the operator dimension")
    dev = float(np.max(np.abs(u @ dagger(u) - np.eye(u.shape[0]))))
    if dev > tol_unitary:
        raise ValidationError(f"basis is not unitary (deviation {dev:.3e})")
    return u @ (dagger(u) @ m @ u).T @ dagger(u)


def rank_with_tol(mat: np.ndarray, tol: float | None = None) -> int:
    """Number of singular values above ``tol`` (default ``1e-8 * largest``)."""
    s = np.linalg.svd(as_matrix(mat), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    if tol is None:
        tol = 1e-8 * float(s[0])
    return int(np.count_nonzero(s > tol))


def fourier_mub_pair(dim: int) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Computational basis together with its discrete-Fourier partner.

    The pair is mutually unbiased in every dimension:
    ``|<a|phi_b>|^2 == 1/dim`` for all ``a, b``.
    """
    if dim < 2:
        raise ValidationError("fourier_mub_pair requires dim >= 2")
    comp = [np.eye(dim, dtype=complex)[:, a].copy() for a in range(dim)]
    a = np.arange(dim)
    fourier = [np.exp(2j * np.pi * a * b / dim) / np.sqrt(dim) for b in range(dim)]
    return comp, fourier


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary drawn from a seeded generator."""
    return np.asarray(unitary_group.rvs(dim, random_state=rng), dtype=complex)


def matrix_to_json(mat: np.ndarray) -> dict:
    m = as_matrix(mat)
    data = [[float(z.real), float(z.imag)] for z in m.reshape(-1)]
    return {"rows": int(m.shape[0]), "cols": int(m.shape[1]), "data": data}


def matrix_from_json(obj: dict) -> np.ndarray:
    try:
        rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed matrix literal: {exc}") from exc
    if len(data) != rows * cols:
        raise ValidationError(f"matrix literal has {len(data)} entries, expected {rows * cols}")
    flat = np.array([complex(re, im) for re, im in data], dtype=complex)
    return as_matrix(flat.reshape(rows, cols))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Unit-trace Hermitian PSD operator."""

    matrix: np.ndarray
    tol_herm: InitVar[float] = TOL_HERM
    tol_psd: InitVar[float] = TOL_PSD
    tol_trace: InitVar[float] = TOL_TRACE

    def __post_init__(self, tol_herm: float, tol_psd: float, tol_trace: float) -> None:
        mat = as_matrix(self.matrix)
        if mat.shape[0] != mat.shape[1]:
            raise ValidationError(f"density matrix must be square, got {mat.shape}")
        require_hermitian(mat, tol_herm, "density matrix")
        require_psd(mat, tol_psd, "density matrix")
        tr = complex(np.trace(mat))
        if abs(tr - 1.0) > tol_trace:
            raise ValidationError(f"density matrix trace {tr} is not 1 within {tol_trace:.1e}")
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class BipartiteState:
    """State on ``C^dim_a (x) C^dim_b`` with the A-major index convention."""

    dim_a: int
    dim_b: int
    state: DensityMatrix

    def __post_init__(self) -> None:
        if self.dim_a < 1 or self.dim_b < 1:
            raise ValidationError("subsystem dimensions must be positive")
        if self.state.dim != self.dim_a * self.dim_b:
            raise ValidationError(
                f"state dimension {self.state.dim} != dim_a * dim_b = {self.dim_a * self.dim_b}"
            )

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, dim_a: int, dim_b: int, **tols) -> "BipartiteState":
        return cls(dim_a, dim_b, DensityMatrix(matrix, **tols))

    @property
    def matrix(self) -> np.ndarray:
        return self.state.matrix


def partial_trace(state: BipartiteState, keep: str) -> DensityMatrix:
    """Trace out one subsystem of a bipartite state (``keep`` is ``"A"`` or ``"B"``)."""
    if keep not in ("A", "B"):
        raise ValidationError(f'keep must be "A" or "B", got {keep!r}')
    da, db = state.dim_a, state.dim_b
    r = state.matrix.reshape(da, db, da, db)
    if keep == "A":
        reduced = np.einsum("ijkj->ik", r)
    else:
        reduced = np.einsum("ijil->jl", r)
    return DensityMatrix(hermitize(reduced))


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Indexed family ``{M_{a|x}}`` of POVMs on one ``dim``-dimensional space.

    ``inputs[x][a]`` is the effect for outcome ``a`` of measurement ``x``.
    Each effect must be PSD and each input must resolve the identity.
    """

    dim: int
    inputs: tuple[tuple[np.ndarray, ...], ...]
    tol_psd: InitVar[float] = TOL_PSD
    tol_completeness: InitVar[float] = TOL_COMPLETENESS

    def __post_init__(self, tol_psd: float, tol_completeness: float) -> None:
        if not self.inputs:
            raise ValidationError("measurement set needs at least one input")
        eye = np.eye(self.dim)
        cleaned = []
        for x, povm in enumerate(self.inputs):
            if not povm:
                raise ValidationError(f"input {x} has no outcomes")
            effects = []
            for a, eff in enumerate(povm):
                mat = as_matrix(eff)
                if mat.shape != (self.dim, self.dim):
                    raise ValidationError(
                        f"effect ({a}|{x}) has shape {mat.shape}, expected {(self.dim, self.dim)}"
                    )
                require_hermitian(mat, 10 * tol_psd, f"effect ({a}|{x})")
                require_psd(mat, tol_psd, f"effect ({a}|{x})")
                effects.append(mat)
            dev = float(np.max(np.abs(sum(effects) - eye)))
            if dev > tol_completeness:
                raise ValidationError(
                    f"input {x} does not resolve the identity (deviation {dev:.3e})"
                )
            cleaned.append(tuple(effects))
        object.__setattr__(self, "inputs", tuple(cleaned))

    @property
    def n_inputs(self) -> int:
        return len(self.inputs)

    @property
    def outcome_counts(self) -> tuple[int, ...]:
        return tuple(len(povm) for povm in self.inputs)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "inputs": [[matrix_to_json(eff) for eff in povm] for povm in self.inputs],
        }

    @classmethod
    def from_json(cls, obj: dict, **tols) -> "MeasurementSet":
        try:
            dim = int(obj["dim"])
            inputs = obj["inputs"]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed measurement-set payload: {exc}") from exc
        povms = tuple(tuple(matrix_from_json(eff) for eff in povm) for povm in inputs)
        return cls(dim, povms, **tols)
