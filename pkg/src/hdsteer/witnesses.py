"""Dimension witness, closed-form noise thresholds, and region tables.

The witness pairs the computational basis with the transposed Fourier basis
and certifies, from the violated level ``n``, that the underlying state has
Schmidt number at least ``n + 1`` and that the measurements are not
``n``-simulable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .qcore import (
    BipartiteState,
    MeasurementSet,
    ValidationError,
    fourier_mub_pair,
    projector,
)
from .steering import Assemblage, max_entangled_vector

__all__ = [
    "CERT_MARGIN",
    "GhdsWitness",
    "CertificationResult",
    "ThresholdReport",
    "mub_measurements",
    "witness_value",
    "witness_bound",
    "certify",
    "pvm_nsim_threshold",
    "iso_sn_threshold",
    "mub_nsim_threshold",
    "entangled_fraction",
    "sn_lower_bound_from_fraction",
    "region_table",
    "region_table_csv",
]

# Strict-violation guard: a value must exceed a bound by this much before a
# level counts as violated, so boundary cases certify conservatively.
CERT_MARGIN = 1e-10

REGION_TABLE_HEADER = "n,iso_sn_threshold,pvm_nsim_threshold"


def _check_level(dim: int, n: int) -> None:
    if not 1 <= n <= dim:
        raise ValidationError(f"level n must satisfy 1 <= n <= {dim}, got {n}")


class GhdsWitness:
    """Two-input witness built from a transposed mutually unbiased pair.

    ``operators[0][a] = |a><a|`` and ``operators[1][b]`` is the transposed
    Fourier projector.  ``normalization`` is ``1 + 1/sqrt(dim)``.
    """

    def __init__(self, dim: int):
        comp, fourier = fourier_mub_pair(dim)
        first = tuple(projector(v) for v in comp)
        second = tuple(projector(v).T for v in fourier)
        eye = np.eye(dim)
        for family, label in ((first, "computational"), (second, "fourier")):
            dev = float(np.max(np.abs(sum(family) - eye)))
            if dev > 1e-12:
                raise ValidationError(f"{label} family does not resolve the identity")
        overlaps = np.abs(np.array([[np.vdot(a, b) for b in fourier] for a in comp])) ** 2
        if float(np.max(np.abs(overlaps - 1.0 / dim))) > 1e-12:
            raise ValidationError("witness bases are not mutually unbiased")
        self.dim = dim
        self.operators = (first, second)
        self.normalization = 1.0 + 1.0 / math.sqrt(dim)

    def __repr__(self) -> str:  # pragma: no cover
        return f"GhdsWitness(dim={self.dim})"


def mub_measurements(dim: int) -> MeasurementSet:
    """Two-input measurement set: computational basis and Fourier basis."""
    comp, fourier = fourier_mub_pair(dim)
    return MeasurementSet(
        dim,
        (
            tuple(projector(v) for v in comp),
            tuple(projector(v) for v in fourier),
        ),
    )


def witness_value(assemblage: Assemblage, witness: GhdsWitness) -> float:
    """Evaluate ``sum_{a,x} Tr[sigma_{a|x} W_{a|x}]``."""
    if assemblage.dim != witness.dim:
        raise ValidationError(
            f"assemblage dimension {assemblage.dim} != witness dimension {witness.dim}"
        )
    if assemblage.n_inputs != 2 or assemblage.outcome_counts != (witness.dim, witness.dim):
        raise ValidationError(
            "witness expects 2 inputs with dim outcomes each, got "
            f"{assemblage.n_inputs} inputs with outcomes {assemblage.outcome_counts}"
        )
    total = 0.0
    for ops, family in zip(assemblage.inputs, witness.operators):
        for sigma_op, w_op in zip(ops, family):
            total += float(np.trace(sigma_op @ w_op).real)
    return total


def witness_bound(dim: int, n: int) -> float:
    """Largest witness value reachable with Schmidt number ``<= n`` resources."""
    _check_level(dim, n)
    normalization = 1.0 + 1.0 / math.sqrt(dim)
    rn = math.sqrt(n)
    return normalization * ((rn - 1.0) / (rn + 1.0) + 1.0)


@dataclass(frozen=True)
class CertificationResult:
    """Strongest level certified by a witness evaluation.

    ``not_simulable = 0`` (and ``certified_sn = 1``) means no violation.
    """

    witness_value: float
    violated_levels: tuple[int, ...]
    certified_sn: int
    not_simulable: int

    def to_json(self) -> dict:
        return {
            "witness_value": self.witness_value,
            "violated_levels": list(self.violated_levels),
            "certified_sn": self.certified_sn,
            "not_simulable": self.not_simulable,
        }


def certify(assemblage: Assemblage, *, margin: float = CERT_MARGIN) -> CertificationResult:
    """Report the largest ``n`` whose bound the assemblage violates."""
    witness = GhdsWitness(assemblage.dim)
    value = witness_value(assemblage, witness)
    violated = tuple(
        n for n in range(1, assemblage.dim + 1) if value > witness_bound(assemblage.dim, n) + margin
    )
    top = max(violated, default=0)
    return CertificationResult(value, violated, top + 1, top)


def pvm_nsim_threshold(dim: int, n: int) -> float:
    """Visibility below which every noisy projective measurement is ``n``-simulable."""
    _check_level(dim, n)
    return (dim * math.sqrt((n + 1) / (dim + 1)) - 1.0) / (dim - 1.0)


def iso_sn_threshold(dim: int, n: int) -> float:
    """Visibility above which the isotropic state has Schmidt number ``>= n + 1``."""
    _check_level(dim, n)
    return (dim * n - 1.0) / (dim * dim - 1.0)


def mub_nsim_threshold(dim: int, n: int) -> float:
    """Visibility above which a noisy unbiased pair is certified not ``n``-simulable."""
    _check_level(dim, n)
    rn = math.sqrt(n)
    return ((dim + math.sqrt(dim) - 1.0) * rn - 1.0) / ((dim - 1.0) * (rn + 1.0))


def entangled_fraction(state: BipartiteState) -> float:
    """Overlap with the maximally entangled state."""
    if state.dim_a != state.dim_b:
        raise ValidationError("entangled fraction needs equal subsystem dimensions")
    phi = max_entangled_vector(state.dim_a)
    return float(np.real(np.vdot(phi, state.matrix @ phi)))


def sn_lower_bound_from_fraction(state: BipartiteState) -> int:
    """Smallest ``n`` with ``<Phi+|rho|Phi+> <= n/d``, reported as ``SN >= n``.

    A fraction exactly on a boundary counts toward the lower level.
    """
    d = state.dim_a
    fraction = entangled_fraction(state)
    for n in range(1, d + 1):
        if fraction <= n / d + 1e-12:
            return n
    return d


@dataclass(frozen=True)
class ThresholdReport:
    """Closed-form thresholds for one ``(dim, n)`` pair."""

    d: int
    n: int
    pvm_nsim: float
    iso_sn: float
    mub_nsim: float
    witness_bound: float

    def __post_init__(self) -> None:
        for name in ("pvm_nsim", "iso_sn", "mub_nsim"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name} = {value} outside [0, 1]")
        lo = 1.0 + 1.0 / math.sqrt(self.d)
        if not lo - 1e-12 <= self.witness_bound <= 2.0 + 1e-12:
            raise ValidationError(f"witness bound {self.witness_bound} outside [{lo}, 2]")

    @classmethod
    def compute(cls, dim: int, n: int) -> "ThresholdReport":
        return cls(
            d=dim,
            n=n,
            pvm_nsim=pvm_nsim_threshold(dim, n),
            iso_sn=iso_sn_threshold(dim, n),
            mub_nsim=mub_nsim_threshold(dim, n),
            witness_bound=witness_bound(dim, n),
        )

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "n": self.n,
            "pvm_nsim": self.pvm_nsim,
            "iso_sn": self.iso_sn,
            "mub_nsim": self.mub_nsim,
            "witness_bound": self.witness_bound,
        }


def region_table(dim: int) -> list[tuple[int, float, float]]:
    """Rows ``(n, iso_sn_threshold, pvm_nsim_threshold)`` for ``n = 1 .. dim-1``."""
    if dim < 2:
        raise ValidationError("region table requires dim >= 2")
    return [(n, iso_sn_threshold(dim, n), pvm_nsim_threshold(dim, n)) for n in range(1, dim)]


def region_table_csv(dim: int) -> str:
    lines = [REGION_TABLE_HEADER]
    for n, iso, pvm in region_table(dim):
        lines.append(f"{n},{iso:.9g},{pvm:.9g}")
    return "\n".join(lines) + "\n"
