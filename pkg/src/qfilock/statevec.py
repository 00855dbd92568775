"""Dense statevector simulation: states, gates, partial trace, Schmidt analysis.

Basis convention: qubit 0 is the least significant bit of the basis index,
so basis index b encodes the bitstring (q_{N-1} ... q_1 q_0).  All index
maps (bipartition interleaving, kernels) are defined against this.

Values are immutable after construction; every operation returns a new value.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

NORM_TOL = 1e-10
HERM_TOL = 1e-10

__all__ = [
    "PureState",
    "DensityMatrix",
    "CMatrix",
    "Bipartition",
    "basis_state",
    "plus_state",
    "ghz_state",
    "apply_one_qubit",
    "apply_cx",
    "apply_dense",
    "partial_trace",
    "partial_trace_op",
    "schmidt",
    "entanglement_entropy",
    "purity",
    "bipartite_matrix",
]


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@lru_cache(maxsize=32)
def popcounts(n_qubits: int) -> np.ndarray:
    """Bit population count for every basis index of an n-qubit register."""
    idx = np.arange(1 << n_qubits, dtype=np.uint64)
    return _freeze(np.bitwise_count(idx).astype(np.int64))


@dataclass(frozen=True)
class PureState:
    """Normalized state of n_qubits qubits as 2**n_qubits complex amplitudes."""

    n_qubits: int
    amps: np.ndarray

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be >= 1, got {self.n_qubits}")
        amps = np.array(self.amps, dtype=np.complex128).ravel()
        if amps.size != 1 << self.n_qubits:
            raise ValueError(
                f"expected {1 << self.n_qubits} amplitudes for "
                f"{self.n_qubits} qubits, got {amps.size}"
            )
        nrm2 = np.vdot(amps, amps).real
        if abs(nrm2 - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized: sum |amp|^2 = {nrm2!r}")
        object.__setattr__(self, "amps", _freeze(amps))

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits


def _check_hermitian(mat: np.ndarray, tol: float, what: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=np.complex128)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{what} must be a square matrix, got shape {mat.shape}")
    if np.max(np.abs(mat - mat.conj().T)) > tol:
        raise ValueError(f"{what} is not Hermitian within {tol}")
    return mat


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian trace-1 matrix on a kept-qubit subspace."""

    mat: np.ndarray

    def __post_init__(self):
        mat = _check_hermitian(self.mat, HERM_TOL, "density matrix")
        tr = np.trace(mat)
        if abs(tr - 1.0) > 1e-10:
            raise ValueError(f"density matrix trace is {tr!r}, expected 1")
        object.__setattr__(self, "mat", _freeze(np.array(mat)))

    @property
    def dim(self) -> int:
        return self.mat.shape[0]


@dataclass(frozen=True)
class CMatrix:
    """Traceless Hermitian matrix (density-matrix derivative)."""

    mat: np.ndarray

    def __post_init__(self):
        mat = _check_hermitian(self.mat, HERM_TOL, "derivative matrix")
        tr = np.trace(mat)
        if abs(tr) > 1e-10:
            raise ValueError(f"derivative matrix trace is {tr!r}, expected 0")
        object.__setattr__(self, "mat", _freeze(np.array(mat)))

    @property
    def dim(self) -> int:
        return self.mat.shape[0]


@dataclass(frozen=True)
class Bipartition:
    """Split of qubits {0..n-1} into a kept subsystem and its traced complement."""

    n_qubits: int
    kept: tuple
    traced: tuple

    def __post_init__(self):
        kept = tuple(int(q) for q in self.kept)
        traced = tuple(int(q) for q in self.traced)
        for name, part in (("kept", kept), ("traced", traced)):
            if any(b <= a for a, b in zip(part, part[1:])):
                raise ValueError(f"{name} indices must be strictly increasing: {part}")
        if sorted(kept + traced) != list(range(self.n_qubits)):
            raise ValueError(
                f"kept {kept} and traced {traced} must partition 0..{self.n_qubits - 1}"
            )
        object.__setattr__(self, "kept", kept)
        object.__setattr__(self, "traced", traced)

    @classmethod
    def from_kept(cls, n_qubits: int, kept) -> "Bipartition":
        kept = tuple(sorted(int(q) for q in kept))
        traced = tuple(q for q in range(n_qubits) if q not in set(kept))
        return cls(n_qubits, kept, traced)

    @classmethod
    def trace_highest(cls, n_qubits: int, k: int) -> "Bipartition":
        """Trace out the k highest-index qubits."""
        if not 0 <= k <= n_qubits:
            raise ValueError(f"cannot trace {k} of {n_qubits} qubits")
        return cls.from_kept(n_qubits, range(n_qubits - k))

    @classmethod
    def mid_cut(cls, n_qubits: int) -> "Bipartition":
        """Central bipartition: keep the n//2 lowest-index qubits."""
        return cls.from_kept(n_qubits, range(n_qubits // 2))

    @property
    def d_kept(self) -> int:
        return 1 << len(self.kept)

    @property
    def d_traced(self) -> int:
        return 1 << len(self.traced)

    def complement(self) -> "Bipartition":
        return Bipartition(self.n_qubits, self.traced, self.kept)


# ---------------------------------------------------------------------------
# state constructors


def basis_state(n_qubits: int, bitstring: int) -> PureState:
    """Computational basis state |bitstring> (qubit 0 = least significant bit)."""
    if not 0 <= bitstring < (1 << n_qubits):
        raise ValueError(f"bitstring {bitstring} out of range for {n_qubits} qubits")
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[bitstring] = 1.0
    return PureState(n_qubits, amps)


def plus_state(n_qubits: int) -> PureState:
    """|+>^n: every amplitude equal to 2**(-n/2)."""
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    dim = 1 << n_qubits
    return PureState(n_qubits, np.full(dim, dim ** -0.5, dtype=np.complex128))


def ghz_state(n_qubits: int) -> PureState:
    """(|0...0> + |1...1>)/sqrt(2)."""
    if n_qubits < 2:
        raise ValueError("GHZ needs at least 2 qubits")
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = amps[-1] = 2 ** -0.5
    return PureState(n_qubits, amps)


# ---------------------------------------------------------------------------
# gate kernels (raw ndarray in/out, shared with the scrambler circuits)


def one_qubit_kernel(amps: np.ndarray, n: int, gate: np.ndarray, target: int) -> np.ndarray:
    """Apply a 2x2 matrix to `target` of a raw 2**n amplitude vector."""
    ax = n - 1 - target  # reshape axis i holds qubit n-1-i
    t = np.moveaxis(amps.reshape([2] * n), ax, -1)
    out = t @ gate.T  # out[..., i] = sum_j gate[i, j] t[..., j]
    return np.ascontiguousarray(np.moveaxis(out, -1, ax)).reshape(-1)


def cx_kernel(amps: np.ndarray, n: int, control: int, target: int) -> np.ndarray:
    """Controlled-X on a raw amplitude vector: flip `target` where `control` is 1."""
    t = amps.reshape([2] * n).copy()
    ic, it = n - 1 - control, n - 1 - target
    sl = [slice(None)] * n
    sl[ic] = 1
    sub_axis = it if it < ic else it - 1  # axis index inside the sliced view
    t[tuple(sl)] = np.flip(t[tuple(sl)], axis=sub_axis)
    return t.reshape(-1)


def _validate_gate(gate) -> np.ndarray:
    gate = np.asarray(gate, dtype=np.complex128)
    if gate.shape != (2, 2):
        raise ValueError(f"gate must be 2x2, got {gate.shape}")
    if np.max(np.abs(gate.conj().T @ gate - np.eye(2))) > 1e-10:
        raise ValueError("gate is not unitary within 1e-10")
    return gate


def apply_one_qubit(state: PureState, gate, target: int) -> PureState:
    """Apply a single-qubit unitary; unitarity checked once per gate."""
    gate = _validate_gate(gate)
    if not 0 <= target < state.n_qubits:
        raise ValueError(f"target {target} out of range")
    return PureState(state.n_qubits, one_qubit_kernel(state.amps, state.n_qubits, gate, target))


def apply_cx(state: PureState, control: int, target: int) -> PureState:
    """Controlled-X with the given control and target qubits."""
    n = state.n_qubits
    if control == target:
        raise ValueError("control and target must differ")
    if not (0 <= control < n and 0 <= target < n):
        raise ValueError(f"qubit index out of range for {n} qubits")
    return PureState(n, cx_kernel(state.amps, n, control, target))


def apply_dense(state: PureState, u: np.ndarray) -> PureState:
    """Apply a full 2**n x 2**n unitary.

    Unitarity is spot-checked on a few deterministic columns (norm and
    pairwise orthogonality within 1e-8); a full check would cost O(d^3).
    """
    u = np.asarray(u, dtype=np.complex128)
    d = state.dim
    if u.shape != (d, d):
        raise ValueError(f"unitary shape {u.shape} does not match dimension {d}")
    cols = sorted({0, d // 3, (2 * d) // 3, d - 1})
    sub = u[:, cols]
    gram = sub.conj().T @ sub
    if np.max(np.abs(gram - np.eye(len(cols)))) > 1e-8:
        raise ValueError("matrix failed the unitarity spot-check (1e-8)")
    return PureState(state.n_qubits, u @ state.amps)


# ---------------------------------------------------------------------------
# bipartite analysis


def bipartite_matrix(amps: np.ndarray, part: Bipartition) -> np.ndarray:
    """Reshape a 2**n amplitude vector into a (d_kept, d_traced) matrix.

    Row index runs over the kept qubits (lowest kept index = least
    significant row bit), column index over the traced qubits, so that
    M @ M.conj().T is the reduced density matrix on the kept subsystem.
    """
    n = part.n_qubits
    t = amps.reshape([2] * n)
    perm = [n - 1 - q for q in reversed(part.kept)] + [n - 1 - q for q in reversed(part.traced)]
    return t.transpose(perm).reshape(part.d_kept, part.d_traced)


def partial_trace(state: PureState, part: Bipartition) -> DensityMatrix:
    """Reduced density matrix of `state` on the kept qubits."""
    if part.n_qubits != state.n_qubits:
        raise ValueError("bipartition does not match state size")
    m = bipartite_matrix(state.amps, part)
    return DensityMatrix(m @ m.conj().T)


def partial_trace_op(op: np.ndarray, part: Bipartition) -> np.ndarray:
    """Matrix partial trace of a Hermitian operator over the traced qubits.

    The trace is preserved: tr(result) = tr(op).
    """
    op = np.asarray(op, dtype=np.complex128)
    d = 1 << part.n_qubits
    if op.shape != (d, d):
        raise ValueError(f"operator shape {op.shape} does not match dimension {d}")
    _check_hermitian(op, 1e-8, "operator")
    n = part.n_qubits
    perm = [n - 1 - q for q in reversed(part.kept)] + [n - 1 - q for q in reversed(part.traced)]
    t = op.reshape([2] * (2 * n))
    t = t.transpose(perm + [n + p for p in perm])
    t = t.reshape(part.d_kept, part.d_traced, part.d_kept, part.d_traced)
    return np.ascontiguousarray(np.einsum("ikjk->ij", t))


def schmidt(state: PureState, part: Bipartition, rank_tolerance: float = 1e-10):
    """Schmidt coefficients (descending) and rank across a bipartition.

    Rank counts coefficients above `rank_tolerance`.
    """
    if part.n_qubits != state.n_qubits:
        raise ValueError("bipartition does not match state size")
    coeffs = np.linalg.svd(bipartite_matrix(state.amps, part), compute_uv=False)
    rank = int(np.sum(coeffs > rank_tolerance))
    return coeffs, rank


def entanglement_entropy(coefficients) -> float:
    """Entropy -sum c_i^2 log2 c_i^2 in bits, with 0 log 0 = 0."""
    c2 = np.asarray(coefficients, dtype=float) ** 2
    total = c2.sum()
    if abs(total - 1.0) > 1e-8:
        raise ValueError(f"squared coefficients sum to {total!r}, expected 1")
    nz = c2 > 0.0
    value = float(-(c2[nz] * np.log2(c2[nz])).sum())
    if -1e-9 < value < 0.0:  # roundoff dust on near-product inputs
        value = 0.0
    return value


def purity(rho: DensityMatrix) -> float:
    """tr(rho^2); equals 1/dim for maximally mixed and 1 for pure states."""
    return float(np.vdot(rho.mat, rho.mat).real)
