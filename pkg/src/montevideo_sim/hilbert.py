"""
Dense linear algebra for small Hilbert spaces.

This module provides the immutable value types (states, density matrices,
Hermitian operators, projectors) and the pure operations the simulation
modules are built on: tensor products, partial traces, unitary evolution and
expectation values. All quantities are in natural units (hbar = 1).

Index convention: in ``tensor(A, B)`` the left factor is the most
significant (slow) index, matching ``numpy.kron``.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike
from scipy import linalg

from .errors import CapacityError, NumericalError, StructuralError

logger = logging.getLogger("montevideo_sim.hilbert")

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
NORM_TOL = 1e-12
PSD_TOL = -1e-10
IDEMPOTENT_TOL = 1e-10
EXPECTATION_IMAG_TOL = 1e-10

MAX_TOTAL_DIM = 2**24
MAX_OPERATOR_BYTES = 2 * 1024**3


def _readonly(values: ArrayLike, *, ndim: int, name: str) -> np.ndarray:
    array = np.array(values, dtype=np.complex128, copy=True)
    if array.ndim != ndim:
        raise StructuralError(f"{name} expects a {ndim}-d array, got shape {array.shape}")
    if ndim == 2 and array.shape[0] != array.shape[1]:
        raise StructuralError(f"{name} must be square, got shape {array.shape}")
    if array.shape[0] == 0:
        raise StructuralError(f"{name} must have a positive dimension")
    if not np.all(np.isfinite(array)):
        raise StructuralError(f"{name} contains non-finite entries")
    array.setflags(write=False)
    return array


def _asymmetry(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(matrix - matrix.conj().T)))


def _check_hermitian(matrix: np.ndarray, name: str) -> None:
    asymmetry = _asymmetry(matrix)
    if asymmetry > HERMITIAN_TOL:
        raise StructuralError(
            f"{name} is not Hermitian: max |A - A^dagger| = {asymmetry:.3e}"
        )


def _hermitize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.conj().T)


def eigh(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian eigendecomposition with diagnostics on failure."""
    try:
        return linalg.eigh(matrix)
    except (linalg.LinAlgError, ValueError) as exc:
        finite = bool(np.all(np.isfinite(matrix)))
        norm = float(np.linalg.norm(matrix)) if finite else math.inf
        raise NumericalError(
            f"eigendecomposition failed ({exc}); finite={finite}, "
            f"frobenius_norm={norm:.3e}, asymmetry={_asymmetry(matrix):.3e}"
        ) from exc


@dataclass(frozen=True, eq=False)
class StateVector:
    """A normalized pure state."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amplitudes = _readonly(self.amplitudes, ndim=1, name="StateVector")
        norm = float(np.linalg.norm(amplitudes))
        if abs(norm - 1.0) > NORM_TOL:
            raise StructuralError(f"StateVector norm {norm!r} is not 1 within {NORM_TOL}")
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def from_amplitudes(cls, amplitudes: ArrayLike) -> "StateVector":
        """Normalize arbitrary (non-zero) amplitudes into a state."""
        values = np.asarray(amplitudes, dtype=np.complex128)
        norm = float(np.linalg.norm(values))
        if norm == 0.0 or not math.isfinite(norm):
            raise StructuralError("cannot normalize a zero or non-finite vector")
        return cls(values / norm)

    @classmethod
    def basis(cls, dim: int, index: int) -> "StateVector":
        if not 0 <= index < dim:
            raise StructuralError(f"basis index {index} outside dimension {dim}")
        values = np.zeros(dim, dtype=np.complex128)
        values[index] = 1.0
        return cls(values)

    @property
    def dim(self) -> int:
        return int(self.amplitudes.shape[0])


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix."""

    entries: np.ndarray
    trace_tol: float = field(default=TRACE_TOL, repr=False)
    check_psd: bool = field(default=True, repr=False)

    def __post_init__(self) -> None:
        rho = _readonly(self.entries, ndim=2, name="DensityMatrix")
        _check_hermitian(rho, "DensityMatrix")
        trace = float(np.trace(rho).real)
        if abs(trace - 1.0) > self.trace_tol:
            raise StructuralError(f"DensityMatrix trace {trace!r} is not 1 within {self.trace_tol}")
        if self.check_psd:
            smallest = float(linalg.eigvalsh(rho, subset_by_index=[0, 0])[0])
            if smallest < PSD_TOL:
                raise StructuralError(
                    "DensityMatrix is not positive semidefinite: "
                    f"smallest eigenvalue {smallest:.3e}"
                )
        object.__setattr__(self, "entries", rho)

    @classmethod
    def from_array(
        cls,
        values: ArrayLike,
        *,
        hermitize: bool = False,
        renormalize: bool = False,
        trace_tol: float = TRACE_TOL,
    ) -> "DensityMatrix":
        """Build from a raw array, optionally removing roundoff asymmetry and trace drift."""
        matrix = np.asarray(values, dtype=np.complex128)
        if hermitize:
            matrix = _hermitize(matrix)
        if renormalize:
            trace = np.trace(matrix).real
            if trace <= 0.0:
                raise NumericalError(f"cannot renormalize a matrix with trace {trace!r}")
            matrix = matrix / trace
        return cls(matrix, trace_tol=trace_tol)

    @classmethod
    def from_state(cls, state: StateVector) -> "DensityMatrix":
        psi = state.amplitudes
        return cls(np.outer(psi, psi.conj()), check_psd=False)

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=np.complex128) / dim)

    @classmethod
    def diagonal(cls, probabilities: ArrayLike) -> "DensityMatrix":
        return cls(np.diag(np.asarray(probabilities, dtype=np.complex128)))

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    def purity(self) -> float:
        return purity(self)


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """A Hermitian matrix (Hamiltonians, spin operators, observables)."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        matrix = _readonly(self.entries, ndim=2, name="HermitianOperator")
        _check_hermitian(matrix, "HermitianOperator")
        object.__setattr__(self, "entries", matrix)

    @classmethod
    def from_array(cls, values: ArrayLike, *, hermitize: bool = False) -> "HermitianOperator":
        matrix = np.asarray(values, dtype=np.complex128)
        return cls(_hermitize(matrix) if hermitize else matrix)

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    @cached_property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues (ascending) and eigenvectors (columns)."""
        return eigh(self.entries)


@dataclass(frozen=True, eq=False)
class Projector:
    """An orthogonal projector."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        matrix = _readonly(self.entries, ndim=2, name="Projector")
        _check_hermitian(matrix, "Projector")
        defect = float(np.max(np.abs(matrix @ matrix - matrix)))
        if defect > IDEMPOTENT_TOL:
            raise StructuralError(f"Projector is not idempotent: max |P^2 - P| = {defect:.3e}")
        object.__setattr__(self, "entries", matrix)

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    @property
    def rank(self) -> int:
        return int(round(float(np.trace(self.entries).real)))


Operand = Union[StateVector, DensityMatrix, HermitianOperator, Projector, np.ndarray]


def _raw(value: Operand) -> np.ndarray:
    if isinstance(value, StateVector):
        return value.amplitudes
    if isinstance(value, (DensityMatrix, HermitianOperator, Projector)):
        return value.entries
    return np.asarray(value, dtype=np.complex128)


def check_capacity(
    dim: int,
    *,
    operator: bool,
    max_dim: int = MAX_TOTAL_DIM,
    max_bytes: int = MAX_OPERATOR_BYTES,
) -> None:
    """Raise CapacityError if a dense object of this dimension is too large."""
    if dim > max_dim:
        raise CapacityError(f"total dimension {dim} exceeds the configured maximum {max_dim}")
    if operator and dim * dim * 16 > max_bytes:
        raise CapacityError(
            f"dense {dim}x{dim} operator needs {dim * dim * 16} bytes, budget is {max_bytes}"
        )


def tensor(a: Operand, b: Operand, *, max_dim: int = MAX_TOTAL_DIM) -> Operand:
    """Kronecker product with the left factor as the most significant index."""
    left, right = _raw(a), _raw(b)
    if left.ndim != right.ndim or left.ndim not in (1, 2):
        raise StructuralError(
            f"cannot tensor operands of shapes {left.shape} and {right.shape}"
        )
    dim = left.shape[0] * right.shape[0]
    check_capacity(dim, operator=left.ndim == 2, max_dim=max_dim)
    product = np.kron(left, right)

    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return StateVector(product)
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(product, trace_tol=a.trace_tol + b.trace_tol, check_psd=False)
    if isinstance(a, Projector) and isinstance(b, Projector):
        return Projector(product)
    if isinstance(a, (HermitianOperator, Projector)) and isinstance(
        b, (HermitianOperator, Projector)
    ):
        return HermitianOperator(product)
    return product


def tensor_all(factors: Sequence[Operand], *, max_dim: int = MAX_TOTAL_DIM) -> Operand:
    """Left-to-right tensor product of a non-empty sequence."""
    if not factors:
        raise StructuralError("tensor_all needs at least one factor")
    result = factors[0]
    for factor in factors[1:]:
        result = tensor(result, factor, max_dim=max_dim)
    return result


def partial_trace(
    rho: Union[DensityMatrix, StateVector],
    keep: Iterable[int],
    dims: Sequence[int],
) -> DensityMatrix:
    """Trace out every factor not listed in ``keep``.

    Args:
        rho: Density matrix, or a pure state (reduced without forming rho)
        keep: Indices of the factors to keep (order is normalized)
        dims: Dimension of every factor, left factor first

    Returns:
        Reduced density matrix over the kept factors
    """
    dims = [int(d) for d in dims]
    if not dims or any(d < 1 for d in dims):
        raise StructuralError(f"invalid factor dimensions {dims}")
    kept = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in kept):
        raise StructuralError(f"keep indices {kept} out of range for {len(dims)} factors")
    traced = [i for i in range(len(dims)) if i not in kept]
    total = math.prod(dims)
    dim_keep = math.prod(dims[i] for i in kept)
    dim_traced = math.prod(dims[i] for i in traced)

    if isinstance(rho, StateVector):
        if rho.dim != total:
            raise StructuralError(f"factor dims {dims} do not multiply to state dim {rho.dim}")
        psi = rho.amplitudes.reshape(dims).transpose(kept + traced).reshape(dim_keep, dim_traced)
        reduced = psi @ psi.conj().T
    else:
        if rho.dim != total:
            raise StructuralError(f"factor dims {dims} do not multiply to matrix dim {rho.dim}")
        n = len(dims)
        order = kept + traced + [n + i for i in kept] + [n + i for i in traced]
        blocks = (
            rho.entries.reshape(dims + dims)
            .transpose(order)
            .reshape(dim_keep, dim_traced, dim_keep, dim_traced)
        )
        reduced = np.einsum("ajbj->ab", blocks)
    return DensityMatrix.from_array(reduced, hermitize=True)


def unitary(H: HermitianOperator, t: float) -> np.ndarray:
    """exp(-iHt) from the eigendecomposition of H."""
    energies, vectors = H.spectrum
    return (vectors * np.exp(-1j * energies * t)) @ vectors.conj().T


def evolve_unitary(H: HermitianOperator, rho: DensityMatrix, t: float) -> DensityMatrix:
    """Return exp(-iHt) rho exp(+iHt)."""
    if H.dim != rho.dim:
        raise StructuralError(f"Hamiltonian dim {H.dim} does not match state dim {rho.dim}")
    if t == 0:
        return rho
    U = unitary(H, t)
    return DensityMatrix.from_array(U @ rho.entries @ U.conj().T, hermitize=True)


def evolve_state(H: HermitianOperator, psi: StateVector, t: float) -> StateVector:
    """Return exp(-iHt)|psi>."""
    if H.dim != psi.dim:
        raise StructuralError(f"Hamiltonian dim {H.dim} does not match state dim {psi.dim}")
    if t == 0:
        return psi
    energies, vectors = H.spectrum
    coefficients = vectors.conj().T @ psi.amplitudes
    return StateVector.from_amplitudes(vectors @ (np.exp(-1j * energies * t) * coefficients))


def expectation(
    A: Union[HermitianOperator, Projector], rho: Union[DensityMatrix, StateVector]
) -> float:
    """Tr(A rho) (or <psi|A|psi>), checked to be real."""
    if A.dim != rho.dim:
        raise StructuralError(f"operator dim {A.dim} does not match state dim {rho.dim}")
    if isinstance(rho, StateVector):
        psi = rho.amplitudes
        value = complex(np.vdot(psi, A.entries @ psi))
    else:
        value = complex(np.einsum("ij,ji->", A.entries, rho.entries))
    if abs(value.imag) > EXPECTATION_IMAG_TOL:
        raise NumericalError(f"expectation has imaginary residue {value.imag:.3e}")
    return value.real


def purity(rho: DensityMatrix) -> float:
    """Tr(rho^2)."""
    return float(np.einsum("ij,ji->", rho.entries, rho.entries).real)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def _pauli(values: list[list[complex]]) -> np.ndarray:
    matrix = np.array(values, dtype=np.complex128)
    matrix.setflags(write=False)
    return matrix


IDENTITY_2 = _pauli([[1, 0], [0, 1]])
PAULI_X = _pauli([[0, 1], [1, 0]])
PAULI_Y = _pauli([[0, -1j], [1j, 0]])
PAULI_Z = _pauli([[1, 0], [0, -1]])


def spin_half() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spin-1/2 operators S = sigma / 2."""
    return PAULI_X / 2, PAULI_Y / 2, PAULI_Z / 2


def embed(
    op: np.ndarray, site: int, dims: Sequence[int], *, max_dim: int = MAX_TOTAL_DIM
) -> np.ndarray:
    """Place a local operator on factor ``site`` of a tensor product."""
    if not 0 <= site < len(dims):
        raise StructuralError(f"site {site} out of range for {len(dims)} factors")
    if op.shape != (dims[site], dims[site]):
        raise StructuralError(f"operator shape {op.shape} does not match factor dim {dims[site]}")
    check_capacity(math.prod(dims), operator=True, max_dim=max_dim)
    factors = [op if i == site else np.eye(d, dtype=np.complex128) for i, d in enumerate(dims)]
    result = factors[0]
    for factor in factors[1:]:
        result = np.kron(result, factor)
    return result


def interval_projector(operator: HermitianOperator, low: float, high: float) -> Projector:
    """Sum of eigenprojectors with eigenvalue in the closed interval [low, high]."""
    if high < low:
        raise StructuralError(f"empty interval [{low}, {high}]")
    energies, vectors = operator.spectrum
    selected = vectors[:, (energies >= low) & (energies <= high)]
    return Projector(selected @ selected.conj().T)


def random_state(dim: int, rng: np.random.Generator) -> StateVector:
    """Haar-distributed pure state."""
    values = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return StateVector.from_amplitudes(values)


def random_density_matrix(
    dim: int, rng: np.random.Generator, rank: Optional[int] = None
) -> DensityMatrix:
    """Random mixed state from the induced (Ginibre) measure."""
    columns = rank or dim
    ginibre = rng.standard_normal((dim, columns)) + 1j * rng.standard_normal((dim, columns))
    return DensityMatrix.from_array(ginibre @ ginibre.conj().T, hermitize=True, renormalize=True)


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> HermitianOperator:
    values = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return HermitianOperator.from_array(scale * values, hermitize=True)
