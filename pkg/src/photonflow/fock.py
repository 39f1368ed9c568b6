"""Truncated multi-mode Fock-space algebra.

Provides the bosonic substrate used by the master-equation level: mode
spaces with hard photon-number truncation, sparse operators on the joint
space, and dense density matrices.

Conventions
-----------
* Mode ``m`` holds Fock states ``0 .. mode_dims[m]-1``.  Truncation is
  hard: the raising operator annihilates the top level.
* Flat indices are row-major over the mode multi-index, i.e. the LAST
  mode varies fastest.  File outputs rely on this ordering.
* All scalars are complex double precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInput

__all__ = [
    "ModeSpace",
    "SparseOperator",
    "DensityMatrix",
    "identity",
    "annihilation",
    "creation",
    "number",
    "tensor_embed",
    "apply",
    "partial_trace",
    "fock_state",
    "fock_density",
    "mixed_fock_density",
    "trace_distance",
]


@dataclass(frozen=True)
class ModeSpace:
    """Tensor product of truncated single-mode Fock spaces."""

    mode_dims: tuple[int, ...]

    def __init__(self, mode_dims: Sequence[int]):
        dims = tuple(int(d) for d in mode_dims)
        if len(dims) == 0:
            raise InvalidInput("a mode space needs at least one mode")
        if any(d < 2 for d in dims):
            raise InvalidInput(f"every mode dimension must be >= 2, got {dims}")
        object.__setattr__(self, "mode_dims", dims)

    @property
    def n_modes(self) -> int:
        return len(self.mode_dims)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.mode_dims))

    def flatten(self, occupations: Sequence[int]) -> int:
        """Flat index of a Fock multi-index (last mode fastest)."""
        if len(occupations) != self.n_modes:
            raise InvalidInput(
                f"expected {self.n_modes} occupation numbers, got {len(occupations)}"
            )
        for n, d in zip(occupations, self.mode_dims):
            if not 0 <= n < d:
                raise InvalidInput(f"occupation {tuple(occupations)} outside {self.mode_dims}")
        return int(np.ravel_multi_index(tuple(occupations), self.mode_dims))

    def unflatten(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.total_dim:
            raise InvalidInput(f"flat index {index} outside [0, {self.total_dim})")
        return tuple(int(i) for i in np.unravel_index(index, self.mode_dims))


@dataclass(frozen=True)
class SparseOperator:
    """Sparse linear operator on a ModeSpace."""

    space: ModeSpace
    matrix: sp.csr_matrix = field(repr=False)

    def __post_init__(self):
        m = self.matrix
        if m.shape != (self.space.total_dim, self.space.total_dim):
            raise InvalidInput(
                f"operator shape {m.shape} does not match space dimension "
                f"{self.space.total_dim}"
            )
        if not sp.isspmatrix_csr(m):
            object.__setattr__(self, "matrix", sp.csr_matrix(m))

    @classmethod
    def from_entries(cls, space: ModeSpace, entries: dict) -> "SparseOperator":
        """Build from a {(row, col): value} map."""
        d = space.total_dim
        rows, cols, vals = [], [], []
        for (r, c), v in entries.items():
            if not (0 <= r < d and 0 <= c < d):
                raise InvalidInput(f"entry index ({r}, {c}) outside [0, {d})")
            rows.append(r)
            cols.append(c)
            vals.append(complex(v))
        m = sp.csr_matrix((vals, (rows, cols)), shape=(d, d), dtype=complex)
        return cls(space, m)

    def entries(self) -> dict:
        coo = self.matrix.tocoo()
        return {(int(r), int(c)): complex(v) for r, c, v in zip(coo.row, coo.col, coo.data)}

    def adjoint(self) -> "SparseOperator":
        return SparseOperator(self.space, self.matrix.conj().T.tocsr())

    def to_dense(self) -> np.ndarray:
        return np.asarray(self.matrix.todense(), dtype=complex)

    def __matmul__(self, other: "SparseOperator") -> "SparseOperator":
        _check_same_space(self.space, other.space)
        return SparseOperator(self.space, (self.matrix @ other.matrix).tocsr())

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        _check_same_space(self.space, other.space)
        return SparseOperator(self.space, (self.matrix + other.matrix).tocsr())

    def __sub__(self, other: "SparseOperator") -> "SparseOperator":
        _check_same_space(self.space, other.space)
        return SparseOperator(self.space, (self.matrix - other.matrix).tocsr())

    def __mul__(self, scalar: complex) -> "SparseOperator":
        return SparseOperator(self.space, (self.matrix * complex(scalar)).tocsr())

    __rmul__ = __mul__


@dataclass
class DensityMatrix:
    """Dense density matrix on a ModeSpace.

    The container itself does not enforce normalization; validity checks
    (trace, Hermiticity, positivity) are available as methods so callers
    can verify and report rather than silently repair.
    """

    space: ModeSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = self.space.total_dim
        if m.shape != (d, d):
            raise InvalidInput(f"density matrix shape {m.shape} does not match dimension {d}")
        self.matrix = m

    @classmethod
    def from_state_vector(cls, space: ModeSpace, vec: np.ndarray) -> "DensityMatrix":
        v = np.asarray(vec, dtype=complex).reshape(-1)
        if v.size != space.total_dim:
            raise InvalidInput("state vector length does not match space dimension")
        return cls(space, np.outer(v, v.conj()))

    def copy(self) -> "DensityMatrix":
        return DensityMatrix(self.space, self.matrix.copy())

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def purity(self) -> float:
        # tr(rho^2) = sum_ij rho_ij rho_ji
        return float(np.real(np.sum(self.matrix * self.matrix.T)))

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(h)[0])

    def expectation(self, op: SparseOperator) -> complex:
        _check_same_space(self.space, op.space)
        # tr(A rho) = sum_ij A_ij rho_ji
        return complex(op.matrix.multiply(self.matrix.T).sum())

    def population(self, occupations: Sequence[int]) -> float:
        i = self.space.flatten(occupations)
        return float(np.real(self.matrix[i, i]))


def _check_same_space(a: ModeSpace, b: ModeSpace) -> None:
    if a.mode_dims != b.mode_dims:
        raise InvalidInput(f"mode spaces differ: {a.mode_dims} vs {b.mode_dims}")


def _check_mode(space: ModeSpace, mode: int) -> None:
    if not 0 <= mode < space.n_modes:
        raise InvalidInput(f"mode index {mode} outside [0, {space.n_modes})")


def identity(space: ModeSpace) -> SparseOperator:
    return SparseOperator(space, sp.identity(space.total_dim, dtype=complex, format="csr"))


def _single_mode_annihilation(dim: int) -> sp.csr_matrix:
    # <n-1| a |n> = sqrt(n); the top level is removed by hard truncation
    return sp.diags(np.sqrt(np.arange(1, dim)), 1, dtype=complex, format="csr")


def annihilation(space: ModeSpace, mode: int) -> SparseOperator:
    """Lowering operator of one mode, identity on the rest."""
    _check_mode(space, mode)
    return tensor_embed(space, _single_mode_annihilation(space.mode_dims[mode]), mode)


def creation(space: ModeSpace, mode: int) -> SparseOperator:
    return annihilation(space, mode).adjoint()


def number(space: ModeSpace, mode: int) -> SparseOperator:
    _check_mode(space, mode)
    d = space.mode_dims[mode]
    return tensor_embed(space, sp.diags(np.arange(d, dtype=float), 0, dtype=complex), mode)


def tensor_embed(space: ModeSpace, single_mode_op, mode: int) -> SparseOperator:
    """Embed a single-mode operator into the joint space.

    Acts as the given operator on ``mode`` and as the identity on all
    other modes.  Sparsity is preserved.
    """
    _check_mode(space, mode)
    op = sp.csr_matrix(single_mode_op, dtype=complex)
    d = space.mode_dims[mode]
    if op.shape != (d, d):
        raise InvalidInput(
            f"single-mode operator shape {op.shape} does not match mode dimension {d}"
        )
    before = int(np.prod(space.mode_dims[:mode], initial=1))
    after = int(np.prod(space.mode_dims[mode + 1 :], initial=1))
    m = op
    if before > 1:
        m = sp.kron(sp.identity(before, dtype=complex), m, format="csr")
    if after > 1:
        m = sp.kron(m, sp.identity(after, dtype=complex), format="csr")
    return SparseOperator(space, sp.csr_matrix(m))


def apply(op: SparseOperator, target: Union[np.ndarray, DensityMatrix]):
    """Apply an operator: matrix-vector or plain matrix-matrix product.

    No normalization is performed; applying to a DensityMatrix returns
    the raw product ``A rho`` in a DensityMatrix container.
    """
    if isinstance(target, DensityMatrix):
        _check_same_space(op.space, target.space)
        return DensityMatrix(op.space, op.matrix @ target.matrix)
    vec = np.asarray(target, dtype=complex).reshape(-1)
    if vec.size != op.space.total_dim:
        raise InvalidInput("state vector length does not match operator space")
    return op.matrix @ vec


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Trace out all modes not in ``keep``.

    The kept modes retain their relative order.  Preserves trace and
    Hermiticity exactly (sums of diagonal blocks).
    """
    keep_list = sorted(set(int(k) for k in keep))
    if not keep_list:
        raise InvalidInput("keep set must name at least one mode")
    for k in keep_list:
        _check_mode(rho.space, k)
    dims = rho.space.mode_dims
    n = len(dims)
    tensor = rho.matrix.reshape(dims + dims)

    # einsum subscripts: traced modes share a letter between bra and ket
    letters = "abcdefghijklmnopqrstuvwxyz"
    if 2 * n > len(letters):
        raise InvalidInput("too many modes for partial trace")
    bra = list(letters[:n])
    ket = []
    out_bra, out_ket = [], []
    next_free = n
    for m in range(n):
        if m in keep_list:
            ket.append(letters[next_free])
            next_free += 1
            out_bra.append(bra[m])
            out_ket.append(ket[m])
        else:
            ket.append(bra[m])
    spec = "".join(bra) + "".join(ket) + "->" + "".join(out_bra) + "".join(out_ket)
    reduced = np.einsum(spec, tensor)

    new_space = ModeSpace([dims[m] for m in keep_list])
    d = new_space.total_dim
    return DensityMatrix(new_space, reduced.reshape(d, d))


def fock_state(space: ModeSpace, occupations: Sequence[int]) -> np.ndarray:
    """Unit vector for a Fock product state."""
    v = np.zeros(space.total_dim, dtype=complex)
    v[space.flatten(occupations)] = 1.0
    return v


def fock_density(space: ModeSpace, occupations: Sequence[int]) -> DensityMatrix:
    return DensityMatrix.from_state_vector(space, fock_state(space, occupations))


def mixed_fock_density(space: ModeSpace, weights: dict) -> DensityMatrix:
    """Statistical mixture of Fock product states.

    ``weights`` maps occupation tuples to nonnegative weights; they are
    normalized to unit trace.
    """
    if not weights:
        raise InvalidInput("mixture needs at least one component")
    total = float(sum(weights.values()))
    if total <= 0:
        raise InvalidInput("mixture weights must sum to a positive value")
    m = np.zeros((space.total_dim, space.total_dim), dtype=complex)
    for occ, w in weights.items():
        if w < 0:
            raise InvalidInput("mixture weights must be nonnegative")
        i = space.flatten(occ)
        m[i, i] += w / total
    return DensityMatrix(space, m)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    _check_same_space(a.space, b.space)
    diff = a.matrix - b.matrix
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))
