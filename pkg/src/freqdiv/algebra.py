"""Operators on a composite space of qubits and truncated bosonic modes.

Subsystems are ordered ``[qubit-1, qubit-2, resonator-a, resonator-b,
resonator-c]`` and Kronecker products follow that order, so the global basis
index of ``|q1, q2, n_a, n_b, n_c>`` is the row-major ravel of the local
labels.  Qubit level 0 is ``|g>`` and level 1 is ``|e>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp

Matrix = Union[np.ndarray, sp.spmatrix, sp.sparray]


class InvalidDimensionError(ValueError):
    pass


class SpaceMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class HilbertSpace:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise InvalidDimensionError("a Hilbert space needs at least one subsystem")
        for d in dims:
            if d < 2:
                raise InvalidDimensionError(f"subsystem dimension must be >= 2, got {d}")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def divider(cls, n_a: int, n_b: int | None = None, n_c: int | None = None) -> "HilbertSpace":
        """Canonical divider space ``[2, 2, n_a, n_b, n_c]``; ``n_b``/``n_c`` default to ``n_a``."""
        n_b = n_a if n_b is None else n_b
        n_c = n_a if n_c is None else n_c
        return cls((2, 2, n_a, n_b, n_c))

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def __len__(self):
        return len(self.dims)

    def index(self, labels: Sequence[int]) -> int:
        """Global basis index of the product state with the given local labels."""
        if len(labels) != len(self.dims):
            raise InvalidDimensionError(f"expected {len(self.dims)} labels, got {len(labels)}")
        return int(np.ravel_multi_index(tuple(labels), self.dims))

    def labels(self, index: int) -> tuple[int, ...]:
        return tuple(int(k) for k in np.unravel_index(index, self.dims))


def _check_same_space(a: "Operator | DensityMatrix", b: "Operator | DensityMatrix"):
    if a.space != b.space:
        raise SpaceMismatchError(f"operands live on different spaces: {a.space.dims} vs {b.space.dims}")


@dataclass(frozen=True, eq=False)
class Operator:
    """Complex square matrix tagged with the space it acts on.

    ``data`` is either a dense ``ndarray`` or a CSR sparse matrix.  Instances
    are treated as immutable; every arithmetic operation returns a new one.
    Products and sums of sparse operators stay sparse.
    """

    space: HilbertSpace
    data: Matrix

    def __post_init__(self):
        shape = self.data.shape
        n = self.space.dim
        if shape != (n, n):
            raise InvalidDimensionError(f"matrix shape {shape} does not match space dimension {n}")
        if sp.issparse(self.data):
            object.__setattr__(self, "data", sp.csr_matrix(self.data, dtype=complex))
        else:
            object.__setattr__(self, "data", np.asarray(self.data, dtype=complex))

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.data)

    def to_dense(self) -> np.ndarray:
        return self.data.toarray() if self.is_sparse else np.array(self.data)

    def dense(self) -> "Operator":
        return Operator(self.space, self.to_dense())

    def sparse(self) -> "Operator":
        return Operator(self.space, sp.csr_matrix(self.data))

    def dag(self) -> "Operator":
        return Operator(self.space, self.data.conj().T)

    def __add__(self, other: "Operator") -> "Operator":
        _check_same_space(self, other)
        return Operator(self.space, _as_result(self.data + other.data))

    def __sub__(self, other: "Operator") -> "Operator":
        _check_same_space(self, other)
        return Operator(self.space, _as_result(self.data - other.data))

    def __neg__(self) -> "Operator":
        return Operator(self.space, -self.data)

    def __mul__(self, scalar: complex) -> "Operator":
        if isinstance(scalar, Operator):
            raise TypeError("use @ for operator products")
        return Operator(self.space, self.data * scalar)

    __rmul__ = __mul__

    def __matmul__(self, other: "Operator") -> "Operator":
        _check_same_space(self, other)
        return Operator(self.space, _as_result(self.data @ other.data))

    def commutator(self, other: "Operator") -> "Operator":
        return self @ other - other @ self

    def trace(self) -> complex:
        return complex(self.data.diagonal().sum())

    def element(self, bra: Sequence[int], ket: Sequence[int]) -> complex:
        """``<bra|O|ket>`` for product-basis labels."""
        i, j = self.space.index(bra), self.space.index(ket)
        return complex(self.data[i, j])

    def hermiticity_error(self) -> float:
        diff = self.data - self.data.conj().T
        if sp.issparse(diff):
            return float(abs(diff).max()) if diff.nnz else 0.0
        return float(np.abs(diff).max())

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        scale = max(1.0, float(abs(self.data).max()))
        return self.hermiticity_error() <= tol * scale

    def allclose(self, other: "Operator", atol: float = 1e-12) -> bool:
        _check_same_space(self, other)
        return bool(np.allclose(self.to_dense(), other.to_dense(), rtol=0.0, atol=atol))


def _as_result(m):
    # sparse-dense mixes come back as np.matrix; keep plain arrays
    if isinstance(m, np.matrix):
        return np.asarray(m)
    return m


def local_annihilator(d: int) -> np.ndarray:
    """Truncated lowering operator with ``<k-1|a|k> = sqrt(k)``.

    For ``d == 2`` this is the qubit lowering operator ``sigma_-``.
    """
    if int(d) != d or d < 2:
        raise InvalidDimensionError(f"local dimension must be an integer >= 2, got {d}")
    return np.diag(np.sqrt(np.arange(1, int(d), dtype=float)), k=1).astype(complex)


def embed(space: HilbertSpace, index: int, local: Matrix) -> Operator:
    """Lift ``local`` to ``I x ... x local x ... x I`` acting on subsystem ``index``."""
    if not 0 <= index < len(space.dims):
        raise IndexError(f"subsystem index {index} out of range for {len(space.dims)} subsystems")
    local = sp.csr_matrix(local, dtype=complex)
    d = space.dims[index]
    if local.shape != (d, d):
        raise InvalidDimensionError(f"local operator shape {local.shape} does not match dims[{index}] = {d}")
    left = int(np.prod(space.dims[:index]))
    right = int(np.prod(space.dims[index + 1:]))
    factors = [sp.identity(left, dtype=complex, format="csr"), local,
               sp.identity(right, dtype=complex, format="csr")]
    data = reduce(lambda x, y: sp.kron(x, y, format="csr"), factors)
    return Operator(space, data)


def identity(space: HilbertSpace) -> Operator:
    return Operator(space, sp.identity(space.dim, dtype=complex, format="csr"))


def zero(space: HilbertSpace) -> Operator:
    return Operator(space, sp.csr_matrix((space.dim, space.dim), dtype=complex))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    space: HilbertSpace
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data.toarray() if sp.issparse(self.data) else self.data, dtype=complex)
        if data.shape != (self.space.dim, self.space.dim):
            raise InvalidDimensionError(f"density matrix shape {data.shape} does not match space dimension {self.space.dim}")
        object.__setattr__(self, "data", data)

    @classmethod
    def basis_state(cls, space: HilbertSpace, labels: Sequence[int]) -> "DensityMatrix":
        rho = np.zeros((space.dim, space.dim), dtype=complex)
        i = space.index(labels)
        rho[i, i] = 1.0
        return cls(space, rho)

    @classmethod
    def ground(cls, space: HilbertSpace) -> "DensityMatrix":
        return cls.basis_state(space, (0,) * len(space.dims))

    @classmethod
    def from_ket(cls, space: HilbertSpace, psi: np.ndarray) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(space, np.outer(psi, psi.conj()))

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def purity(self) -> float:
        return float(np.vdot(self.data, self.data).real)

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.data + self.data.conj().T)
        return float(np.linalg.eigvalsh(h)[0])

    def check(self, tol: float = 1e-8) -> None:
        """Raise ``ValueError`` unless the matrix is Hermitian, unit-trace and positive within ``tol``."""
        herm = float(np.abs(self.data - self.data.conj().T).max())
        if herm > tol:
            raise ValueError(f"density matrix is not Hermitian (max deviation {herm:.3e})")
        tr = self.trace()
        if abs(tr - 1.0) > tol:
            raise ValueError(f"density matrix trace {tr:.12g} differs from 1")
        lam = self.min_eigenvalue()
        if lam < -tol:
            raise ValueError(f"density matrix has negative eigenvalue {lam:.3e}")


def expectation(rho: DensityMatrix, op: Operator) -> complex:
    """``Tr(rho A)``."""
    _check_same_space(rho, op)
    if op.is_sparse:
        # Tr(rho A) = sum_ij rho_ij A_ji
        a = op.data.tocoo()
        return complex(np.sum(rho.data[a.col, a.row] * a.data))
    return complex(np.einsum("ij,ji->", rho.data, op.data))
