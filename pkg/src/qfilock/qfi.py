"""Quantum Fisher information for pure and reduced states.

The parameter is imprinted by a collective half-Pauli generator
G = (1/2) sum_i sigma_i^axis; the mixed-state value follows the
eigendecomposition formula 2 sum_ij |<i|drho|j>|^2 / (l_i + l_j) over
eigenpairs with l_i + l_j above a small tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .statevec import (
    Bipartition,
    CMatrix,
    DensityMatrix,
    PureState,
    bipartite_matrix,
    one_qubit_kernel,
    popcounts,
)

PAIR_TOL = 1e-12

_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
_SDG = np.array([[1, 0], [0, -1j]], dtype=np.complex128)
# x: sigma_x = H sigma_z H;  y: sigma_y = (SH) sigma_z (SH)^dagger
_TO_Z_BASIS = {"x": _H, "y": _H @ _SDG}
_FROM_Z_BASIS = {"x": _H, "y": _SDG.conj().T @ _H}

__all__ = [
    "GeneratorSpec",
    "QfiValue",
    "encode",
    "apply_generator",
    "derivative_full",
    "qfi_pure",
    "qfi_mixed",
    "qfi_reduced",
    "reduced_density_and_derivative",
    "qfi_from_reduced_vectors",
]


@dataclass(frozen=True)
class GeneratorSpec:
    """Collective generator G = (1/2) sum_i sigma_i^axis on n_qubits qubits."""

    axis: str
    n_qubits: int

    def __post_init__(self):
        if self.axis not in ("x", "y", "z"):
            raise ValueError(f"axis must be one of x, y, z; got {self.axis!r}")
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be >= 1")


@dataclass(frozen=True)
class QfiValue:
    """QFI value plus bookkeeping from the eigenpair sum."""

    value: float
    rank_used: int
    pairs_skipped: int


@lru_cache(maxsize=32)
def _spin_weights(n: int) -> np.ndarray:
    """Eigenvalues m(b) = (n - 2 popcount(b))/2 of G along z on each basis index."""
    w = (n - 2 * popcounts(n)) / 2.0
    w.setflags(write=False)
    return w


def _check_sizes(state: PureState, g: GeneratorSpec):
    if g.n_qubits != state.n_qubits:
        raise ValueError("generator and state sizes do not match")


def apply_generator(state_or_amps, g: GeneratorSpec) -> np.ndarray:
    """Return G|psi> as a raw (generally unnormalized) vector."""
    if isinstance(state_or_amps, PureState):
        _check_sizes(state_or_amps, g)
        amps = state_or_amps.amps
    else:
        amps = np.asarray(state_or_amps, dtype=np.complex128)
    n = g.n_qubits
    if g.axis == "z":
        return amps * _spin_weights(n)
    t = amps.reshape([2] * n)
    out = np.zeros_like(t)
    for q in range(n):
        ax = n - 1 - q
        flipped = np.flip(t, axis=ax)
        if g.axis == "x":
            out += 0.5 * flipped
        else:  # y: amplitude -i onto bit 0, +i onto bit 1
            sign = np.array([-0.5j, 0.5j]).reshape([2 if a == ax else 1 for a in range(n)])
            out += sign * flipped
    return out.reshape(-1)


def encode(state: PureState, g: GeneratorSpec, theta: float) -> PureState:
    """exp(-i theta G)|psi>: diagonal phases along z, basis-rotated for x/y."""
    _check_sizes(state, g)
    n = state.n_qubits
    amps = state.amps
    if g.axis in _TO_Z_BASIS:
        to_z, from_z = _TO_Z_BASIS[g.axis], _FROM_Z_BASIS[g.axis]
        for q in range(n):
            amps = one_qubit_kernel(amps, n, to_z, q)
        amps = amps * np.exp(-1j * theta * _spin_weights(n))
        for q in range(n):
            amps = one_qubit_kernel(amps, n, from_z, q)
    else:
        amps = amps * np.exp(-1j * theta * _spin_weights(n))
    return PureState(n, amps)


def qfi_pure(state: PureState, g: GeneratorSpec) -> QfiValue:
    """Pure-state QFI 4 (<G^2> - <G>^2)."""
    gv = apply_generator(state, g)
    mean = np.vdot(state.amps, gv).real
    var = np.vdot(gv, gv).real - mean * mean
    return QfiValue(float(4.0 * max(var, 0.0)), rank_used=1, pairs_skipped=0)


def derivative_full(state_at_theta: PureState, g: GeneratorSpec) -> CMatrix:
    """drho/dtheta = -i [G, |psi><psi|] as a dense matrix."""
    _check_sizes(state_at_theta, g)
    amps = state_at_theta.amps
    gv = apply_generator(amps, g)
    outer = np.outer(gv, amps.conj())
    return CMatrix(-1j * (outer - outer.conj().T))


def _wrap_rho(rho) -> DensityMatrix:
    return rho if isinstance(rho, DensityMatrix) else DensityMatrix(rho)


def _wrap_cmat(c) -> CMatrix:
    return c if isinstance(c, CMatrix) else CMatrix(c)


def _pair_sum(lam: np.ndarray, m: np.ndarray, pair_tolerance: float, extra_zeros: int = 0):
    """Eigenpair sum over an explicit spectrum plus `extra_zeros` exact zeros.

    The zero modes outside the explicit block are orthogonal to the support
    of the derivative, so they contribute skipped pairs but no value.
    """
    if np.min(lam, initial=0.0) < -1e-10:
        raise ValueError(f"density matrix has eigenvalue {lam.min()!r} < -1e-10")
    lam = np.clip(lam, 0.0, None)
    s = lam[:, None] + lam[None, :]
    mask = s > pair_tolerance
    value = 2.0 * float(np.sum(np.abs(m[mask]) ** 2 / s[mask]))
    small = int(np.sum(lam <= pair_tolerance))
    skipped = int(s.size - mask.sum())
    if extra_zeros:
        # pairs (explicit small, outside zero) both ways, plus outside x outside
        skipped += 2 * extra_zeros * small + extra_zeros * extra_zeros
    rank_used = int(np.sum(lam > pair_tolerance))
    return QfiValue(value, rank_used, skipped)


def qfi_mixed(rho, rho_dot, pair_tolerance: float = PAIR_TOL) -> QfiValue:
    """Mixed-state QFI from a density matrix and its parameter derivative."""
    rho = _wrap_rho(rho)
    rho_dot = _wrap_cmat(rho_dot)
    if rho.dim != rho_dot.dim:
        raise ValueError("density matrix and derivative dimensions differ")
    lam, vec = np.linalg.eigh(rho.mat)
    m = vec.conj().T @ rho_dot.mat @ vec
    return _pair_sum(lam, m, pair_tolerance)


def reduced_density_and_derivative(phi: np.ndarray, deriv_vec: np.ndarray, part: Bipartition):
    """Partial traces of |phi><phi| and of -i(|v><phi| - |phi><v|) over `traced`.

    `phi` is the scrambled encoded state and `deriv_vec` the scrambled image
    of (G - <G>)|psi>, which together carry the full rank-2 derivative.
    """
    x = bipartite_matrix(np.asarray(phi, dtype=np.complex128), part)
    w = bipartite_matrix(np.asarray(deriv_vec, dtype=np.complex128), part)
    cross = w @ x.conj().T
    rho = DensityMatrix(x @ x.conj().T)
    c = CMatrix(-1j * (cross - cross.conj().T))
    return rho, c


def qfi_from_reduced_vectors(
    phi: np.ndarray,
    deriv_vec: np.ndarray,
    part: Bipartition,
    pair_tolerance: float = PAIR_TOL,
) -> QfiValue:
    """QFI of the reduced state defined by `phi` and `deriv_vec`.

    Identical to qfi_mixed on the partial traces; when the traced subsystem is
    small the spectrum is resolved inside the (at most 2 d_traced)-dimensional
    span of the reshaped vectors instead of diagonalizing the full kept block.
    """
    phi = np.asarray(phi, dtype=np.complex128)
    v = np.asarray(deriv_vec, dtype=np.complex128)
    dk, dt = part.d_kept, part.d_traced

    if dk == 1:
        # nothing kept: the 1x1 derivative is the full trace, which vanishes
        return QfiValue(0.0, rank_used=1, pairs_skipped=0)

    if dt == 1:
        # pure kept state: only pairs involving |phi> contribute
        a = np.vdot(phi, v)
        c11 = 2.0 * a.imag
        norm_cphi2 = np.vdot(v, v).real - abs(a) ** 2
        value = float(max(4.0 * norm_cphi2 - 3.0 * c11 * c11, 0.0))
        return QfiValue(value, rank_used=1, pairs_skipped=(dk - 1) ** 2)

    if 2 * dt < dk:
        x = bipartite_matrix(phi, part)
        w = bipartite_matrix(v, part)
        q, _ = np.linalg.qr(np.concatenate([x, w], axis=1))
        xq = q.conj().T @ x
        wq = q.conj().T @ w
        cross = wq @ xq.conj().T
        lam, vec = np.linalg.eigh(xq @ xq.conj().T)
        m = vec.conj().T @ (-1j * (cross - cross.conj().T)) @ vec
        return _pair_sum(lam, m, pair_tolerance, extra_zeros=dk - q.shape[1])

    rho, c = reduced_density_and_derivative(phi, v, part)
    return qfi_mixed(rho, c, pair_tolerance)


def qfi_reduced(
    state: PureState,
    g: GeneratorSpec,
    scramble,
    part: Bipartition,
    theta0: float = 0.0,
    pair_tolerance: float = PAIR_TOL,
) -> QfiValue:
    """QFI of the kept subsystem after encoding at theta0 and scrambling.

    `scramble` is None, a dense unitary, or a linear callable on raw
    amplitude vectors (e.g. a circuit or propagator closure).
    """
    if part.n_qubits != state.n_qubits:
        raise ValueError("bipartition does not match state size")
    psi = encode(state, g, theta0)
    gv = apply_generator(psi, g)
    mean = np.vdot(psi.amps, gv).real
    w = gv - mean * psi.amps  # (G - <G>)|psi>, orthogonal to |psi>
    if scramble is None:
        phi, wv = psi.amps, w
    elif callable(scramble):
        phi, wv = scramble(np.array(psi.amps)), scramble(w)
    else:
        u = np.asarray(scramble, dtype=np.complex128)
        if u.shape != (psi.dim, psi.dim):
            raise ValueError(f"scramble shape {u.shape} does not match dimension {psi.dim}")
        phi, wv = u @ psi.amps, u @ w
    return qfi_from_reduced_vectors(phi, wv, part, pair_tolerance)
