"""Exact Haar-average theory: Weingarten calculus and closed-form QFI fractions.

Everything here is exact rational arithmetic (fractions.Fraction); floats
appear only at the reporting boundary.  Small-d Weingarten denominators like
d(d^2-1)(d^2-4) shred float precision, so the Gram inversion is exact.

Permutations are tuples of 0-based images; cycles are written 1-based in
from_cycles so they read like standard cycle notation, e.g. (1,2,3) maps
1->2->3->1.  compose(p, q) applies q first.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "DimPair",
    "WeingartenTable",
    "identity_perm",
    "from_cycles",
    "compose",
    "inverse",
    "cycle_count",
    "cycle_type",
    "all_permutations",
    "permutation_operator",
    "weingarten_table",
    "qfi_fraction_small",
    "qfi_fraction_small_asymptote",
    "qfi_fraction_large",
    "verify_small_fraction_two_copy",
    "verify_large_fraction_perm_sums",
    "second_moment_mc_check",
]


# ---------------------------------------------------------------------------
# permutations


def identity_perm(n: int) -> tuple:
    return tuple(range(n))


def from_cycles(n: int, *cycles) -> tuple:
    """Permutation of {0..n-1} from 1-based cycles: (1,2,3) means 1->2->3->1."""
    images = list(range(n))
    seen = set()
    for cyc in cycles:
        for a in cyc:
            if not 1 <= a <= n:
                raise ValueError(f"cycle entry {a} outside 1..{n}")
            if a in seen:
                raise ValueError(f"element {a} repeated across cycles")
            seen.add(a)
        for i, a in enumerate(cyc):
            images[a - 1] = cyc[(i + 1) % len(cyc)] - 1
    return tuple(images)


def compose(p: tuple, q: tuple) -> tuple:
    """(p q)(k) = p(q(k)): q acts first."""
    return tuple(p[q[k]] for k in range(len(p)))


def inverse(p: tuple) -> tuple:
    inv = [0] * len(p)
    for k, pk in enumerate(p):
        inv[pk] = k
    return tuple(inv)


def cycle_count(p: tuple) -> int:
    """Number of disjoint cycles, fixed points included."""
    seen = [False] * len(p)
    count = 0
    for start in range(len(p)):
        if seen[start]:
            continue
        count += 1
        k = start
        while not seen[k]:
            seen[k] = True
            k = p[k]
    return count


def cycle_type(p: tuple) -> tuple:
    """Sorted (descending) cycle lengths; the conjugacy-class label."""
    seen = [False] * len(p)
    lengths = []
    for start in range(len(p)):
        if seen[start]:
            continue
        length = 0
        k = start
        while not seen[k]:
            seen[k] = True
            k = p[k]
            length += 1
        lengths.append(length)
    return tuple(sorted(lengths, reverse=True))


def all_permutations(n: int) -> list:
    return list(itertools.permutations(range(n)))


def permutation_operator(p: tuple, d: int) -> np.ndarray:
    """Copy-permutation unitary on (C^d)^{x n}: V(p) (x)_k psi_k = (x)_k psi_{p(k)}."""
    n = len(p)
    dim = d ** n
    cols = np.arange(dim)
    digits = np.empty((n, dim), dtype=np.int64)
    rem = cols
    for k in range(n - 1, -1, -1):  # slot k is digit of weight d**(n-1-k)
        digits[k] = rem % d
        rem = rem // d
    rows = np.zeros(dim, dtype=np.int64)
    for k in range(n):
        rows = rows * d + digits[p[k]]
    v = np.zeros((dim, dim), dtype=np.complex128)
    v[rows, cols] = 1.0
    return v


# ---------------------------------------------------------------------------
# Weingarten table


def _solve_exact(a, b):
    """Solve A x = b over Fractions by Gaussian elimination with pivoting."""
    n = len(b)
    m = [row[:] + [b[i]] for i, row in enumerate(a)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if m[r][col] != 0), None)
        if pivot is None:
            raise ValueError("matrix is singular")
        m[col], m[pivot] = m[pivot], m[col]
        inv_p = Fraction(1, 1) / m[col][col]
        m[col] = [x * inv_p for x in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                factor = m[r][col]
                m[r] = [x - factor * y for x, y in zip(m[r], m[col])]
    return [m[r][n] for r in range(n)]


@dataclass(frozen=True)
class WeingartenTable:
    """Weingarten function on S_n at dimension d, keyed by cycle type."""

    n: int
    d: int
    values: dict

    def wg(self, p: tuple) -> Fraction:
        return self.values[cycle_type(p)]


def weingarten_table(n: int, d: int) -> WeingartenTable:
    """Invert the Gram matrix G[s,t] = d**cycles(s t^-1) exactly.

    The Weingarten function is the identity column of the inverse; it is a
    class function, so the table stores one value per cycle type.
    """
    if not 1 <= n <= 4:
        raise ValueError("moment order n must be in 1..4")
    if d < n:
        raise ValueError(f"gram matrix is singular for d={d} < n={n}")
    perms = all_permutations(n)
    gram = [
        [Fraction(d ** cycle_count(compose(s, inverse(t))), 1) for t in perms]
        for s in perms
    ]
    e = identity_perm(n)
    rhs = [Fraction(1 if p == e else 0, 1) for p in perms]
    col = _solve_exact(gram, rhs)
    values: dict = {}
    for p, w in zip(perms, col):
        ct = cycle_type(p)
        if ct in values and values[ct] != w:
            raise AssertionError("weingarten values not constant on cycle types")
        values[ct] = w
    return WeingartenTable(n, d, values)


# ---------------------------------------------------------------------------
# closed-form QFI fractions


@dataclass(frozen=True)
class DimPair:
    """Subsystem dimensions (d_a for the smaller side by convention)."""

    d_a: int
    d_b: int

    def __post_init__(self):
        if self.d_a < 1 or self.d_b < 1:
            raise ValueError("dimensions must be >= 1")

    @property
    def d(self) -> int:
        return self.d_a * self.d_b


def qfi_fraction_small(dp: DimPair) -> Fraction:
    """Haar-averaged QFI fraction retained by the smaller subsystem:
    d (d_a^2 - 1) / (2 (d^2 - 1))."""
    d = dp.d
    return Fraction(d * (dp.d_a ** 2 - 1), 2 * (d ** 2 - 1))


def qfi_fraction_small_asymptote(dp: DimPair) -> Fraction:
    """Large-dimension limit d_a / (2 d_b)."""
    return Fraction(dp.d_a, 2 * dp.d_b)


def qfi_fraction_large(dp: DimPair) -> Fraction:
    """Haar-averaged QFI fraction retained by the larger subsystem.

    d_a^3 (d_b^2-1) [d_b (2d+9) + d_a (-3 d_a^2 + d + 15)]
    over 2 (d^2-1)(d+2)(d+3); tends to 1 for d_b >> d_a >> 1.
    """
    da, db, d = dp.d_a, dp.d_b, dp.d
    num = da ** 3 * (db ** 2 - 1) * (db * (2 * d + 9) + da * (-3 * da ** 2 + d + 15))
    den = 2 * (d ** 2 - 1) * (d + 2) * (d + 3)
    return Fraction(num, den)


def qfi_fraction_large_asymptote() -> Fraction:
    return Fraction(1, 1)


def analytic_loss_ratio(n_qubits: int, k_traced: int):
    """Haar curve for tracing k of n qubits: fraction(s) of the full QFI kept.

    Returns a list of (label, Fraction): the larger-subsystem value when the
    kept side dominates, the smaller-subsystem value when it does not, and
    both at the half cut.
    """
    if not 0 <= k_traced <= n_qubits:
        raise ValueError("traced count out of range")
    d_traced, d_kept = 1 << k_traced, 1 << (n_qubits - k_traced)
    out = []
    if d_kept >= d_traced:
        out.append(("kept_larger", qfi_fraction_large(DimPair(d_traced, d_kept))))
    if d_kept <= d_traced:
        out.append(("kept_smaller", qfi_fraction_small(DimPair(d_kept, d_traced))))
    return out


# ---------------------------------------------------------------------------
# independent re-derivations


def _two_copy_trace(sigma: tuple, alpha_a: tuple, beta_b: tuple, dp: DimPair) -> Fraction:
    """tr[V(sigma) (V_A(alpha) x V_B(beta))] = d_a^cycles(sigma alpha) d_b^cycles(sigma beta).

    A copy permutation on the joint space factors into the same permutation
    on each tensor factor, and tr V(p) = dim**cycles(p).
    """
    return Fraction(
        dp.d_a ** cycle_count(compose(sigma, alpha_a))
        * dp.d_b ** cycle_count(compose(sigma, beta_b)),
        1,
    )


def verify_small_fraction_two_copy(dp: DimPair):
    """Rebuild the smaller-subsystem fraction from the 2-copy moment operator.

    The twice-averaged derivative is (1/2)[Wg(swap) I + Wg(e) SWAP] (unit
    full-state QFI); contracting with SWAP_A x I_B and weighting by d_a must
    reproduce qfi_fraction_small exactly.
    """
    if dp.d_a > dp.d_b:
        raise ValueError("expects d_a <= d_b")
    table = weingarten_table(2, dp.d)
    e = identity_perm(2)
    swap = from_cycles(2, (1, 2))
    lhs = (
        Fraction(dp.d_a, 2)
        * (
            table.wg(swap) * _two_copy_trace(e, swap, e, dp)
            + table.wg(e) * _two_copy_trace(swap, swap, e, dp)
        )
    )
    rhs = qfi_fraction_small(dp)
    return lhs, rhs, abs(float(lhs - rhs))


def verify_large_fraction_perm_sums(dp: DimPair):
    """Evaluate the 3-copy/4-copy permutation sums for the larger subsystem.

    Returns (sum_value, closed_form, ratio).  The ratio must be independent
    of the dimension pair; its value is reported rather than pinned because
    the sum is stated up to the full-state QFI normalization.
    """
    if dp.d < 4:
        raise ValueError("needs total dimension >= 4")
    da, db = Fraction(dp.d_a), Fraction(dp.d_b)
    t3 = weingarten_table(3, dp.d)
    t4 = weingarten_table(4, dp.d)

    c123 = from_cycles(3, (1, 2, 3))
    c132 = from_cycles(3, (1, 3, 2))
    t12 = from_cycles(3, (1, 2))
    s3_total = Fraction(0)
    for sigma in all_permutations(3):
        bracket = (
            2 * t3.wg(compose(t12, sigma))
            + t3.wg(compose(c123, sigma))
            + t3.wg(compose(c132, sigma))
        )
        s3_total += (
            da ** (cycle_count(sigma) + 2)
            * db ** cycle_count(compose(sigma, c123))
            * bracket
        )

    c1234 = from_cycles(4, (1, 2, 3, 4))
    pair_set = [from_cycles(4, (1, 3)), from_cycles(4, (1, 3), (2, 4))]
    cycle_set = [
        from_cycles(4, (1, 2, 3)),
        from_cycles(4, (1, 3, 2)),
        from_cycles(4, (1, 3, 4)),
        from_cycles(4, (1, 4, 3)),
        from_cycles(4, (1, 2, 4, 3)),
        from_cycles(4, (1, 3, 2, 4)),
        from_cycles(4, (1, 3, 4, 2)),
        from_cycles(4, (1, 4, 2, 3)),
    ]
    s4_total = Fraction(0)
    for sigma in all_permutations(4):
        bracket = Fraction(3, 2) * sum(t4.wg(compose(tau, sigma)) for tau in pair_set)
        bracket += Fraction(3, 4) * sum(t4.wg(compose(tau, sigma)) for tau in cycle_set)
        s4_total += (
            da ** (cycle_count(sigma) + 3)
            * db ** cycle_count(compose(sigma, c1234))
            * bracket
        )

    total = s3_total - s4_total
    closed = qfi_fraction_large(dp)
    return total, closed, total / closed


def second_moment_mc_check(d: int, samples: int, seed) -> float:
    """Max entrywise deviation between sampled and exact 2-copy moments.

    Averages U^{x2} O U^{x2 dagger} over Haar samples for a random traceless
    Hermitian O (Frobenius norm 1) and compares against the Weingarten sum.
    """
    if d > 64:
        raise ValueError("two-copy operators at d > 64 are too large")
    from .scramblers import sample_haar

    rng = np.random.default_rng(seed)
    a = rng.standard_normal((d * d, d * d)) + 1j * rng.standard_normal((d * d, d * d))
    o = (a + a.conj().T) / 2
    o -= np.trace(o) / (d * d) * np.eye(d * d)
    o /= np.linalg.norm(o)

    table = weingarten_table(2, d)
    perms = all_permutations(2)
    vops = {p: permutation_operator(p, d) for p in perms}
    exact = np.zeros_like(o)
    for sigma in perms:
        for tau in perms:
            wg = float(table.wg(compose(tau, sigma)))
            exact += wg * np.trace(o @ vops[tau]) * vops[sigma]

    acc = np.zeros_like(o)
    for k in range(samples):
        u = sample_haar(d, rng.integers(0, 2 ** 63))
        uu = np.kron(u, u)
        acc += uu @ o @ uu.conj().T
    acc /= samples
    return float(np.max(np.abs(acc - exact)))
