"""Scrambling dynamics: Haar unitaries, brickwork circuits, disordered XX chains, OAT.

Conventions recorded here once:
  - R_y(theta) = exp(-i theta sigma_y / 2); the brickwork layer uses theta = pi/4.
  - Brickwork layer order (first to last): CX on pairs starting at sites
    1,3,5,... (1-based), CX on pairs starting at 2,4,..., then R_y on every
    qubit.  CX control is the lower site of the pair.  Open boundary.
  - XX chain: H = sum_i (XX + YY)_{i,i+1} + sum_i h_i X_i, open boundary,
    with the random fields h_i drawn uniformly from [-1, 1].
  - oat_state(n, tau) measures tau in units of the pairwise two-body
    coupling, i.e. the phase on basis index b is exp(-2i tau m(b)^2) with
    m(b) = (n - 2 popcount(b))/2; tau = pi/4 then yields the x-basis GHZ
    state for even n.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import cos, sin, pi

import numpy as np

from .statevec import PureState, cx_kernel, one_qubit_kernel, plus_state, popcounts

SCRAMBLER_KINDS = ("haar", "brickwork", "xx_chain", "none")

__all__ = [
    "ScramblerSpec",
    "DisorderFields",
    "sample_haar",
    "brickwork_apply",
    "brickwork_kernel",
    "xx_fields",
    "xx_hamiltonian_apply",
    "xx_matvec",
    "evolve",
    "evolve_vector",
    "oat_state",
    "oat_phases",
    "build_scrambler",
    "ry_gate",
]


@dataclass(frozen=True)
class ScramblerSpec:
    """Tagged choice of scrambling dynamics for the run configs."""

    kind: str
    n_qubits: int
    depth_L: int = 0
    time_t: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SCRAMBLER_KINDS:
            raise ValueError(f"kind must be one of {SCRAMBLER_KINDS}, got {self.kind!r}")
        if self.depth_L < 0:
            raise ValueError("depth_L must be >= 0")
        if self.time_t < 0:
            raise ValueError("time_t must be >= 0")


@dataclass(frozen=True)
class DisorderFields:
    """Per-site transverse fields h_i in [-1, 1]."""

    h: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float).ravel()
        if h.size and np.max(np.abs(h)) > 1.0:
            raise ValueError("fields must lie in [-1, 1]")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @property
    def n_qubits(self) -> int:
        return self.h.size


def sample_haar(d: int, seed) -> np.ndarray:
    """Haar-distributed d x d unitary.

    Ginibre matrix, QR, then each column rescaled by the unit phase of the
    corresponding diagonal of R so the distribution is exactly Haar rather
    than QR-convention biased.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def ry_gate(theta: float) -> np.ndarray:
    """R_y(theta) = exp(-i theta sigma_y / 2)."""
    c, s = cos(theta / 2), sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


_RY_LAYER = ry_gate(pi / 4)


def brickwork_kernel(amps: np.ndarray, n: int, layers: int) -> np.ndarray:
    """Raw-vector form of brickwork_apply."""
    for _ in range(layers):
        for i in range(0, n - 1, 2):
            amps = cx_kernel(amps, n, i, i + 1)
        for i in range(1, n - 1, 2):
            amps = cx_kernel(amps, n, i, i + 1)
        for q in range(n):
            amps = one_qubit_kernel(amps, n, _RY_LAYER, q)
    return amps


def brickwork_apply(state: PureState, layers: int) -> PureState:
    """Apply `layers` brickwork layers (CX bricks plus quarter-turn rotations)."""
    if layers < 0:
        raise ValueError("layer count must be >= 0")
    if layers == 0:
        return state
    return PureState(state.n_qubits, brickwork_kernel(state.amps, state.n_qubits, layers))


def xx_fields(n: int, seed) -> DisorderFields:
    """n independent uniform draws from [-1, 1], deterministic per seed."""
    if n < 2:
        raise ValueError("chain needs at least 2 sites")
    rng = np.random.default_rng(seed)
    return DisorderFields(rng.uniform(-1.0, 1.0, n))


def xx_matvec(amps: np.ndarray, fields: DisorderFields) -> np.ndarray:
    """H|psi> for the disordered XX chain, matrix-free.

    The XX+YY bond term maps |..01..> <-> |..10..> with coefficient 2; the
    field term flips one bit with coefficient h_i.
    """
    h = fields.h
    n = h.size
    t = amps.reshape([2] * n)
    out = np.zeros_like(t)
    for i in range(n - 1):
        ai, aj = n - 1 - i, n - 1 - (i + 1)
        lo = [slice(None)] * n
        hi = [slice(None)] * n
        lo[ai], lo[aj] = 1, 0  # bit i = 1, bit i+1 = 0
        hi[ai], hi[aj] = 0, 1
        out[tuple(lo)] += 2.0 * t[tuple(hi)]
        out[tuple(hi)] += 2.0 * t[tuple(lo)]
    for i in range(n):
        if h[i] != 0.0:
            out += h[i] * np.flip(t, axis=n - 1 - i)
    return out.reshape(-1)


def xx_hamiltonian_apply(state_or_amps, fields: DisorderFields) -> np.ndarray:
    """H|psi> as a raw vector; accepts a PureState or amplitude array."""
    amps = state_or_amps.amps if isinstance(state_or_amps, PureState) else np.asarray(
        state_or_amps, dtype=np.complex128
    )
    if amps.size != 1 << fields.n_qubits:
        raise ValueError("state and field sizes do not match")
    return xx_matvec(amps, fields)


def _dense_hamiltonian(fields: DisorderFields) -> np.ndarray:
    d = 1 << fields.n_qubits
    cols = np.eye(d, dtype=np.complex128)
    return np.column_stack([xx_matvec(cols[:, k], fields) for k in range(d)])


def _lanczos_expm(matvec, v: np.ndarray, t: float, m: int, step_tol: float, max_rejects: int):
    """exp(-i t H) v for Hermitian H via Lanczos with adaptive substeps.

    Local error per substep is estimated from the last Krylov component and
    kept below step_tol; the substep halves on rejection.
    """
    nrm = np.linalg.norm(v)
    if nrm == 0.0 or t == 0.0:
        return v.copy()
    scale = np.linalg.norm(matvec(v)) / nrm + 1e-30  # crude |H| estimate
    remaining = t
    dt = min(t, m / (2.0 * scale))
    cur = v.copy()
    rejects = 0
    while remaining > 0.0:
        dt = min(dt, remaining)
        beta0 = np.linalg.norm(cur)
        basis = np.empty((m, cur.size), dtype=np.complex128)
        alphas = np.zeros(m)
        betas = np.zeros(m)  # betas[j] couples basis j-1 and j
        basis[0] = cur / beta0
        k = m
        next_beta = 0.0
        breakdown = False
        for j in range(m):
            w = matvec(basis[j])
            alphas[j] = np.vdot(basis[j], w).real
            w -= alphas[j] * basis[j]
            if j > 0:
                w -= betas[j] * basis[j - 1]
            # full reorthogonalization; m is small and drift would leak error
            w -= basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
            b = np.linalg.norm(w)
            if b < 1e-13 * beta0:
                k = j + 1
                breakdown = True
                break
            if j + 1 < m:
                betas[j + 1] = b
                basis[j + 1] = w / b
            else:
                next_beta = b
        tri = np.diag(alphas[:k]) + np.diag(betas[1:k], 1) + np.diag(betas[1:k], -1)
        evals, evecs = np.linalg.eigh(tri)
        y = evecs @ (np.exp(-1j * dt * evals) * evecs[0].conj())
        err = 0.0 if breakdown else next_beta * abs(y[k - 1]) * dt
        if err > step_tol and not breakdown:
            dt *= 0.5
            rejects += 1
            if rejects > max_rejects:
                raise RuntimeError(
                    f"propagator failed to converge: t_left={remaining!r}, "
                    f"dt={dt!r}, err_est={err!r}, krylov_dim={m}"
                )
            continue
        cur = beta0 * (y @ basis[:k])
        remaining -= dt
        if err < 0.1 * step_tol:
            dt *= 1.4
    return cur


def evolve_vector(
    amps: np.ndarray,
    fields: DisorderFields,
    t: float,
    method: str = "auto",
    krylov_dim: int = 30,
    step_tol: float = 1e-10,
    max_rejects: int = 200,
) -> np.ndarray:
    """exp(-i t H) applied to a raw amplitude vector (linear, no normalization)."""
    if t < 0:
        raise ValueError("time must be >= 0")
    amps = np.asarray(amps, dtype=np.complex128)
    n = fields.n_qubits
    if amps.size != 1 << n:
        raise ValueError("state and field sizes do not match")
    if t == 0.0:
        return amps.copy()
    if method == "auto":
        method = "dense" if n <= 8 else "krylov"
    if method == "dense":
        ham = _dense_hamiltonian(fields)
        evals, evecs = np.linalg.eigh(ham)
        return evecs @ (np.exp(-1j * t * evals) * (evecs.conj().T @ amps))
    if method != "krylov":
        raise ValueError(f"unknown method {method!r}")
    return _lanczos_expm(lambda x: xx_matvec(x, fields), amps, t, krylov_dim, step_tol, max_rejects)


def evolve(state: PureState, fields: DisorderFields, t: float, **kwargs) -> PureState:
    """Propagate a state under the disordered XX chain for time t."""
    return PureState(state.n_qubits, evolve_vector(state.amps, fields, t, **kwargs))


def oat_phases(n: int, tau: float) -> np.ndarray:
    """Diagonal twisting phases exp(-2i tau m(b)^2), tau in two-body units."""
    m = (n - 2 * popcounts(n)) / 2.0
    return np.exp(-2j * tau * m * m)


def oat_state(n: int, tau: float) -> PureState:
    """One-axis-twisted state: collective twisting applied to |+>^n.

    tau is measured in units of the pairwise coupling strength, so tau = pi/4
    gives the x-basis GHZ superposition for even n and tau = 0 gives |+>^n.
    """
    if n < 2:
        raise ValueError("twisting needs at least 2 qubits")
    return PureState(n, plus_state(n).amps * oat_phases(n, tau))


def build_scrambler(spec: ScramblerSpec, fields: DisorderFields | None = None):
    """Linear map on raw amplitude vectors implementing the spec, or None.

    For xx_chain the disorder fields default to xx_fields(n, spec.seed).
    """
    if spec.kind == "none":
        return None
    if spec.kind == "haar":
        u = sample_haar(1 << spec.n_qubits, spec.seed)
        return lambda v: u @ v
    if spec.kind == "brickwork":
        return lambda v: brickwork_kernel(np.array(v), spec.n_qubits, spec.depth_L)
    if fields is None:
        fields = xx_fields(spec.n_qubits, spec.seed)
    return lambda v: evolve_vector(v, fields, spec.time_t)
