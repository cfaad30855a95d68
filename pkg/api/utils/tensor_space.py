# api/utils/tensor_space.py
"""
Dense linear algebra on the spin-chain space V^{⊗n}, V = C^2.

Basis convention: index bit m-1 set means the m-th factor carries v_-.
Weight subspaces are indexed by l-subsets M of {1..n} in lexicographic order;
that order fixes every matrix layout in the package.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy import linalg

logger = logging.getLogger(__name__)

SubsetIndex = Tuple[int, ...]

SINGULAR_RCOND = 1e-10

_PAULI = {
    "plus": np.array([[0, 1], [0, 0]], dtype=complex),
    "minus": np.array([[0, 0], [1, 0]], dtype=complex),
    "three": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[0, 0], [0, 1]], dtype=complex),
    "id": np.eye(2, dtype=complex),
}


@lru_cache(maxsize=None)
def subsets(n: int, ell: int) -> Tuple[SubsetIndex, ...]:
    """All l-subsets of {1..n} in lexicographic order"""
    if ell < 0 or ell > n:
        return ()
    return tuple(combinations(range(1, n + 1), ell))


def subset_mask(members: Sequence[int]) -> int:
    mask = 0
    for m in members:
        mask |= 1 << (m - 1)
    return mask


@lru_cache(maxsize=None)
def weight_indices(n: int, ell: int) -> Tuple[int, ...]:
    """Flat basis indices of the weight-l block, in subset order"""
    return tuple(subset_mask(M) for M in subsets(n, ell))


def validate_subset(members: Sequence[int], n: int) -> SubsetIndex:
    members = tuple(int(m) for m in members)
    if any(m < 1 or m > n for m in members):
        raise IndexError(f"subset {members} out of range 1..{n}")
    if any(a >= b for a, b in zip(members, members[1:])):
        raise ValueError(f"subset {members} is not strictly increasing")
    return members


@dataclass(frozen=True)
class TensorVector:
    """Vector in V^{⊗n} stored as 2^n complex amplitudes"""
    n: int
    data: np.ndarray

    def __post_init__(self):
        if self.data.shape != (2 ** self.n,):
            raise ValueError(f"expected {2 ** self.n} amplitudes, got {self.data.shape}")

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def weight_coords(self, ell: int) -> np.ndarray:
        """Coordinates along v_M, M running over l-subsets"""
        return self.data[list(weight_indices(self.n, ell))]

    def in_weight(self, ell: int, tol: float = 0.0) -> bool:
        outside = np.delete(self.data, list(weight_indices(self.n, ell)))
        return bool(np.all(np.abs(outside) <= tol * max(self.norm(), 1.0)))

    @classmethod
    def from_weight_coords(cls, n: int, ell: int, coords: Sequence[complex]) -> "TensorVector":
        data = np.zeros(2 ** n, dtype=complex)
        data[list(weight_indices(n, ell))] = np.asarray(coords, dtype=complex)
        return cls(n, data)


@dataclass(frozen=True)
class TensorOperator:
    """Dense operator on V^{⊗n}"""
    n: int
    data: np.ndarray

    def __post_init__(self):
        dim = 2 ** self.n
        if self.data.shape != (dim, dim):
            raise ValueError(f"expected a {dim}x{dim} matrix, got {self.data.shape}")

    def __matmul__(self, other):
        if isinstance(other, TensorOperator):
            return TensorOperator(self.n, self.data @ other.data)
        if isinstance(other, TensorVector):
            return TensorVector(self.n, self.data @ other.data)
        return self.data @ other

    def __add__(self, other: "TensorOperator") -> "TensorOperator":
        return TensorOperator(self.n, self.data + other.data)

    def __sub__(self, other: "TensorOperator") -> "TensorOperator":
        return TensorOperator(self.n, self.data - other.data)

    def scaled(self, c: complex) -> "TensorOperator":
        return TensorOperator(self.n, c * self.data)

    def block(self, ell_out: int, ell_in: int = None) -> np.ndarray:
        """Matrix between weight blocks in v_M coordinates"""
        ell_in = ell_out if ell_in is None else ell_in
        rows = list(weight_indices(self.n, ell_out))
        cols = list(weight_indices(self.n, ell_in))
        return self.data[np.ix_(rows, cols)]

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.data))


def identity(n: int) -> TensorOperator:
    return TensorOperator(n, np.eye(2 ** n, dtype=complex))


def commutator(a: TensorOperator, b: TensorOperator) -> TensorOperator:
    return TensorOperator(a.n, a.data @ b.data - b.data @ a.data)


def relative_norm(residual: TensorOperator, *operands: TensorOperator) -> float:
    """Frobenius norm of a residual over the product of operand norms"""
    scale = 1.0
    for op in operands:
        scale *= max(op.frobenius(), 1e-300)
    return residual.frobenius() / scale


def basis_vector(members: Sequence[int], n: int) -> TensorVector:
    """The coordinate vector v_M"""
    members = validate_subset(members, n)
    data = np.zeros(2 ** n, dtype=complex)
    data[subset_mask(members)] = 1.0
    return TensorVector(n, data)


def _embed(factors: Dict[int, np.ndarray], n: int) -> np.ndarray:
    # site 1 is the least significant bit, so it is the last Kronecker factor
    out = np.ones((1, 1), dtype=complex)
    for site in range(n, 0, -1):
        out = np.kron(out, factors.get(site, _PAULI["id"]))
    return out


def site_operator(kind: str, site: int, n: int) -> TensorOperator:
    """A Pauli-type 2x2 matrix acting on one factor"""
    if kind not in ("plus", "minus", "three", "H"):
        raise ValueError(f"unknown site operator {kind!r}")
    if not 1 <= site <= n:
        raise IndexError(f"site {site} out of range 1..{n}")
    return TensorOperator(n, _embed({site: _PAULI[kind]}, n))


@lru_cache(maxsize=None)
def _permutation_matrix(i: int, j: int, n: int) -> np.ndarray:
    dim = 2 ** n
    idx = np.arange(dim)
    bi = (idx >> (i - 1)) & 1
    bj = (idx >> (j - 1)) & 1
    swapped = idx ^ ((bi ^ bj) << (i - 1)) ^ ((bi ^ bj) << (j - 1))
    mat = np.zeros((dim, dim), dtype=complex)
    mat[swapped, idx] = 1.0
    mat.flags.writeable = False
    return mat


def permutation(i: int, j: int, n: int) -> TensorOperator:
    """The flip P_ij exchanging factors i and j"""
    if not (1 <= i <= n and 1 <= j <= n) or i == j:
        raise IndexError(f"invalid factor pair ({i}, {j}) for n={n}")
    return TensorOperator(n, _permutation_matrix(i, j, n).copy())


def global_sl2(kind: str, n: int) -> TensorOperator:
    """Sigma^a = sum over sites of sigma^a_m"""
    if kind not in ("plus", "minus", "three"):
        raise ValueError(f"unknown sl2 generator {kind!r}")
    total = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for m in range(1, n + 1):
        total += site_operator(kind, m, n).data
    return TensorOperator(n, total)


def weight_projector(n: int, ell: int) -> TensorOperator:
    """Projector onto (V^{⊗n})_l as a polynomial in Sigma^3"""
    s3 = global_sl2("three", n).data
    target = n - 2 * ell
    proj = np.eye(2 ** n, dtype=complex)
    for k in range(n + 1):
        if k == ell:
            continue
        other = n - 2 * k
        proj = proj @ (s3 - other * np.eye(2 ** n)) / (target - other)
    return TensorOperator(n, proj)


def singular_dimension(n: int, ell: int) -> int:
    if ell < 0 or 2 * ell > n:
        return 0
    return comb(n, ell) - (comb(n, ell - 1) if ell >= 1 else 0)


def singular_coords(n: int, ell: int) -> np.ndarray:
    """Orthonormal basis (columns, v_M coordinates) of ker Sigma^+ on the weight-l block"""
    if ell < 0 or ell > n or 2 * ell > n:
        return np.zeros((comb(n, ell) if 0 <= ell <= n else 0, 0), dtype=complex)
    if ell == 0:
        return np.ones((1, 1), dtype=complex)
    block = global_sl2("plus", n).block(ell - 1, ell)
    return linalg.null_space(block, rcond=SINGULAR_RCOND)


def subspace_basis(n: int, ell: int, singular: bool = False) -> List[TensorVector]:
    if ell < 0 or ell > n:
        return []
    if not singular:
        return [basis_vector(M, n) for M in subsets(n, ell)]
    coords = singular_coords(n, ell)
    return [TensorVector.from_weight_coords(n, ell, coords[:, j]) for j in range(coords.shape[1])]


def casimir_A0(n: int) -> TensorOperator:
    """A_0 = 1/2 Sigma^- Sigma^+"""
    return (global_sl2("minus", n) @ global_sl2("plus", n)).scaled(0.5)


def a0_closed_form(n: int, ell: int) -> List[Tuple[float, int]]:
    """Eigenvalues (l-k)(n-k-l+1)/2 of A_0 on the weight-l block, with multiplicities"""
    out = []
    for k in range(0, min(ell, n - ell) + 1):
        mult = comb(n, k) - (comb(n, k - 1) if k >= 1 else 0)
        out.append(((ell - k) * (n - k - ell + 1) / 2.0, mult))
    return out


def a0_spectrum(n: int, ell: int) -> np.ndarray:
    """Sorted eigenvalues of A_0 restricted to the weight-l block"""
    block = casimir_A0(n).block(ell)
    return np.sort(np.linalg.eigvalsh(0.5 * (block + block.conj().T)))


def a0_kernel(n: int, ell: int, threshold: float = 1e-10) -> np.ndarray:
    """Eigenvectors of A_0 on the weight-l block with eigenvalue below threshold"""
    block = casimir_A0(n).block(ell)
    vals, vecs = np.linalg.eigh(0.5 * (block + block.conj().T))
    return vecs[:, np.abs(vals) < threshold]


def principal_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Principal angles between column spans, largest first"""
    if a.shape[1] == 0 or b.shape[1] == 0:
        return np.zeros(0)
    return linalg.subspace_angles(a, b)


def largest_angle(a: np.ndarray, b: np.ndarray) -> float:
    angles = principal_angles(a, b)
    return float(angles[0]) if angles.size else 0.0


def orthonormal(columns: np.ndarray, rcond: float = None) -> np.ndarray:
    if columns.size == 0:
        return columns.reshape(columns.shape[0], 0)
    return linalg.orth(columns, rcond=rcond)
