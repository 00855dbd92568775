"""Reproducible experiment pipelines emitting CSV rows.

Each pipeline is a pure function of its RunConfig: per-task seeds are derived
from the master seed with a stable hash, tasks are gathered and sorted
canonically before writing, so identical configs give byte-identical CSVs
regardless of execution order or thread count.

Seed streams (second derive_seed argument): 0 = scrambler samples,
1 = disorder realizations, 2 = random traced-subset draws.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import struct
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields as dc_fields

import numpy as np

from .haar_theory import DimPair, qfi_fraction_large, qfi_fraction_small
from .qfi import GeneratorSpec, apply_generator, encode, qfi_from_reduced_vectors, qfi_pure
from .scramblers import ScramblerSpec, brickwork_kernel, evolve_vector, oat_state, sample_haar, xx_fields
from .statevec import Bipartition, PureState, basis_state, bipartite_matrix, ghz_state

log = logging.getLogger("qfilock")

PROTOCOLS = ("fig1_haar", "fig2_entropy", "fig2_phase_digital", "fig2_phase_analog", "fig3_oat")

CSV_COLUMNS = [
    "protocol", "N", "K", "L", "t", "tau", "sample", "realization", "seed",
    "qfi", "qfi_ratio", "entropy_bits", "schmidt_rank",
]
CSV_HEADER = ",".join(CSV_COLUMNS)

DENSE_HAAR_MAX_QUBITS = 12

STREAM_SCRAMBLER = 0
STREAM_DISORDER = 1
STREAM_SUBSET = 2


class ConfigError(ValueError):
    """Bad run configuration or CLI flags (exit code 2)."""


class NumericalError(RuntimeError):
    """Numerical routine failed to converge (exit code 3)."""


class VerificationFailure(RuntimeError):
    """A verification table contains a FAIL row (exit code 1)."""


@dataclass
class RunConfig:
    n_qubits: int
    protocol: str
    scrambler: ScramblerSpec
    k_list: list
    samples: int = 1
    realizations: int = 1
    theta0: float = 0.0
    tau_grid: list | None = None
    t_grid: list | None = None
    L_grid: list | None = None
    master_seed: int = 0
    output_path: str | None = None
    traced_random: bool = False

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.n_qubits < 1:
            raise ConfigError("n_qubits must be >= 1")
        if not self.k_list:
            raise ConfigError("k_list must be non-empty")
        self.k_list = [int(k) for k in self.k_list]
        for k in self.k_list:
            if not 0 <= k <= self.n_qubits:
                raise ConfigError(f"k_list entry {k} outside 0..{self.n_qubits}")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")


@dataclass
class ResultRow:
    protocol: str
    n: int
    k: int | None = None
    l: int | None = None
    t: float | None = None
    tau: float | None = None
    sample: int | None = None
    realization: int | None = None
    seed: int | None = None
    qfi: float | None = None
    qfi_ratio: float | None = None
    entropy_bits: float | None = None
    schmidt_rank: int | None = None

    def sort_key(self):
        def none_low(v):
            return (0, 0) if v is None else (1, v)

        return tuple(none_low(v) for v in (
            self.protocol, self.n, self.l, self.t, self.tau, self.k,
            self.sample, self.realization,
        ))


def derive_seed(master_seed: int, *indices: int) -> int:
    """Stable 64-bit child seed from a master seed and index tuple.

    SHA-256 over the tag b"qfilock-seed-v1" followed by each value packed as
    a big-endian u64 (master first); the first 8 digest bytes, big-endian,
    are the seed.  Documented so runs can be reproduced externally.
    """
    h = hashlib.sha256(b"qfilock-seed-v1")
    for v in (master_seed, *indices):
        h.update(struct.pack(">Q", int(v) & 0xFFFFFFFFFFFFFFFF))
    return int.from_bytes(h.digest()[:8], "big")


# ---------------------------------------------------------------------------
# config I/O


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    doc = dict(doc)
    scr = doc.pop("scrambler", None)
    if scr is None:
        raise ConfigError("missing key: scrambler")
    if not isinstance(scr, dict):
        raise ConfigError("bad value for key: scrambler (expected object)")
    scr = dict(scr)
    scr.setdefault("n_qubits", doc.get("n_qubits", 0))
    scr_fields = {f.name for f in dc_fields(ScramblerSpec)}
    for key in scr:
        if key not in scr_fields:
            raise ConfigError(f"unknown key: scrambler.{key}")
    try:
        scrambler = ScramblerSpec(**scr)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value under scrambler: {exc}") from exc

    cfg_fields = {f.name for f in dc_fields(RunConfig)}
    for key in doc:
        if key not in cfg_fields:
            raise ConfigError(f"unknown key: {key}")
    missing = [k for k in ("n_qubits", "protocol", "k_list") if k not in doc]
    if missing:
        raise ConfigError(f"missing key: {missing[0]}")
    try:
        return RunConfig(scrambler=scrambler, **doc)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc


def read_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc)


def config_to_dict(cfg: RunConfig) -> dict:
    return asdict(cfg)


def write_config(cfg: RunConfig, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# CSV output


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))  # builtin-float repr even for numpy scalars
    return str(value)


def write_rows(rows, path: str):
    """Serialize rows as CSV (UTF-8, LF, fixed header); atomic via tmp+rename."""
    rows = sorted(rows, key=ResultRow.sort_key)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in (
                    row.protocol, row.n, row.k, row.l, row.t, row.tau,
                    row.sample, row.realization, row.seed,
                    row.qfi, row.qfi_ratio, row.entropy_bits, row.schmidt_rank,
                )) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_rows(path: str):
    """Read a CSV produced by write_rows back into ResultRow values."""
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise ConfigError(f"unexpected CSV header in {path}")
        for rec in reader:
            out.append(ResultRow(
                protocol=rec["protocol"],
                n=int(rec["N"]),
                k=int(rec["K"]) if rec["K"] else None,
                l=int(rec["L"]) if rec["L"] else None,
                t=float(rec["t"]) if rec["t"] else None,
                tau=float(rec["tau"]) if rec["tau"] else None,
                sample=int(rec["sample"]) if rec["sample"] else None,
                realization=int(rec["realization"]) if rec["realization"] else None,
                seed=int(rec["seed"]) if rec["seed"] else None,
                qfi=float(rec["qfi"]) if rec["qfi"] else None,
                qfi_ratio=float(rec["qfi_ratio"]) if rec["qfi_ratio"] else None,
                entropy_bits=float(rec["entropy_bits"]) if rec["entropy_bits"] else None,
                schmidt_rank=int(rec["schmidt_rank"]) if rec["schmidt_rank"] else None,
            ))
    return out


# ---------------------------------------------------------------------------
# shared pipeline pieces


def _pmap(fn, items, threads: int):
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _loss_bipartition(cfg: RunConfig, k: int, sample: int) -> Bipartition:
    """Traced set for a loss of k qubits: highest-index block by default,
    or a seeded random subset per sample when traced_random is set."""
    n = cfg.n_qubits
    if not cfg.traced_random or k in (0, n):
        return Bipartition.trace_highest(n, k)
    rng = np.random.default_rng(derive_seed(cfg.master_seed, STREAM_SUBSET, sample, k))
    traced = sorted(int(q) for q in rng.choice(n, size=k, replace=False))
    return Bipartition.from_kept(n, [q for q in range(n) if q not in set(traced)])


def _encoded_pair(state: PureState, g: GeneratorSpec, theta0: float):
    """Encoded state and its centered generator image (G - <G>)|psi>."""
    psi = encode(state, g, theta0)
    gv = apply_generator(psi, g)
    mean = np.vdot(psi.amps, gv).real
    return psi.amps, gv - mean * psi.amps


def _schmidt_stats(phi: np.ndarray, part: Bipartition):
    coeffs = np.linalg.svd(bipartite_matrix(phi, part), compute_uv=False)
    c2 = coeffs ** 2
    nz = c2 > 0.0
    entropy = float(-(c2[nz] * np.log2(c2[nz])).sum())
    if -1e-9 < entropy < 0.0:  # roundoff dust on near-product states
        entropy = 0.0
    return entropy, int(np.sum(coeffs > 1e-10))


def _timed(label: str, t0: float):
    log.debug("%s took %.3fs", label, time.monotonic() - t0)


# ---------------------------------------------------------------------------
# pipelines


def run_fig1(cfg: RunConfig, threads: int = 1):
    """Haar scrambling of an encoded product state, swept over loss count K.

    Numerical rows carry the per-sample reduced-QFI ratio; analytic rows
    (sample = -1) carry the closed-form curve, the larger-subsystem branch
    flagged with realization = -1 and the smaller-subsystem branch with -2.
    Both branches are emitted at the half cut.
    """
    n = cfg.n_qubits
    if cfg.protocol != "fig1_haar":
        raise ConfigError(f"run_fig1 expects protocol fig1_haar, got {cfg.protocol}")
    if n > DENSE_HAAR_MAX_QUBITS:
        raise ConfigError(
            f"dense Haar sampling is capped at {DENSE_HAAR_MAX_QUBITS} qubits "
            f"(got {n}); use the brickwork circuit as a scrambling proxy instead"
        )
    g = GeneratorSpec("x", n)
    state = basis_state(n, 0)
    ref = qfi_pure(encode(state, g, cfg.theta0), g).value

    def one_sample(s: int):
        t0 = time.monotonic()
        seed = derive_seed(cfg.master_seed, STREAM_SCRAMBLER, s)
        u = sample_haar(1 << n, seed)
        psi, w = _encoded_pair(state, g, cfg.theta0)
        phi, wv = u @ psi, u @ w
        rows = []
        for k in cfg.k_list:
            part = _loss_bipartition(cfg, k, s)
            val = qfi_from_reduced_vectors(phi, wv, part).value
            entropy, rank = _schmidt_stats(phi, part)
            rows.append(ResultRow(
                protocol=cfg.protocol, n=n, k=k, sample=s, realization=0, seed=seed,
                qfi=val, qfi_ratio=val / ref, entropy_bits=entropy, schmidt_rank=rank,
            ))
        _timed(f"fig1 sample {s}", t0)
        return rows

    rows = [row for chunk in _pmap(one_sample, range(cfg.samples), threads) for row in chunk]
    for k in cfg.k_list:
        d_traced, d_kept = 1 << k, 1 << (n - k)
        if d_kept >= d_traced:  # kept side is the larger subsystem
            frac = float(qfi_fraction_large(DimPair(d_traced, d_kept)))
            rows.append(ResultRow(protocol=cfg.protocol, n=n, k=k, sample=-1,
                                  realization=-1, qfi=frac * ref, qfi_ratio=frac))
        if d_kept <= d_traced:
            frac = float(qfi_fraction_small(DimPair(d_kept, d_traced)))
            rows.append(ResultRow(protocol=cfg.protocol, n=n, k=k, sample=-1,
                                  realization=-2, qfi=frac * ref, qfi_ratio=frac))
    return sorted(rows, key=ResultRow.sort_key)


def _entropy_sweep_sizes(cfg: RunConfig):
    # entropy panels sweep even system sizes up to n_qubits at the mid cut
    return [n for n in range(4, cfg.n_qubits + 1, 2)]


def run_fig2_entropy(cfg: RunConfig, threads: int = 1):
    """Mid-cut entropy and Schmidt rank of a scrambled encoded GHZ state,
    swept over even system sizes and circuit depth (digital) or time (analog)."""
    if cfg.protocol != "fig2_entropy":
        raise ConfigError(f"run_fig2_entropy expects protocol fig2_entropy, got {cfg.protocol}")
    kind = cfg.scrambler.kind
    if kind == "brickwork":
        if cfg.L_grid is None:
            raise ConfigError("missing key: L_grid")
        grid = [int(v) for v in cfg.L_grid]
    elif kind == "xx_chain":
        if cfg.t_grid is None:
            raise ConfigError("missing key: t_grid")
        grid = [float(v) for v in cfg.t_grid]
    else:
        raise ConfigError(f"fig2_entropy needs a brickwork or xx_chain scrambler, got {kind}")

    def one_size(n: int):
        t0 = time.monotonic()
        g = GeneratorSpec("z", n)
        psi, _ = _encoded_pair(ghz_state(n), g, cfg.theta0)
        part = Bipartition.mid_cut(n)
        rows = []
        if kind == "brickwork":
            for layers in grid:
                phi = brickwork_kernel(np.array(psi), n, layers)
                entropy, rank = _schmidt_stats(phi, part)
                rows.append(ResultRow(protocol=cfg.protocol, n=n, k=0, l=layers,
                                      sample=0, realization=0,
                                      entropy_bits=entropy, schmidt_rank=rank))
        else:
            order = sorted(range(len(grid)), key=lambda i: grid[i])
            for r in range(cfg.realizations):
                seed = derive_seed(cfg.master_seed, STREAM_DISORDER, n, r)
                fields = xx_fields(n, seed)
                cur = np.array(psi)
                reached = 0.0
                for gi in order:  # ascending times evolve incrementally
                    cur = evolve_vector(cur, fields, grid[gi] - reached)
                    reached = grid[gi]
                    entropy, rank = _schmidt_stats(cur, part)
                    rows.append(ResultRow(protocol=cfg.protocol, n=n, k=0, t=grid[gi],
                                          sample=0, realization=r, seed=seed,
                                          entropy_bits=entropy, schmidt_rank=rank))
        _timed(f"fig2 entropy N={n}", t0)
        return rows

    rows = [row for chunk in _pmap(one_size, _entropy_sweep_sizes(cfg), threads) for row in chunk]
    return sorted(rows, key=ResultRow.sort_key)


def run_fig2_phase(cfg: RunConfig, threads: int = 1):
    """Reduced-QFI ratio of an encoded GHZ state over the (depth, loss) or
    (time, loss) grid, normalized to the full Heisenberg value."""
    n = cfg.n_qubits
    g = GeneratorSpec("z", n)
    ref = qfi_pure(ghz_state(n), g).value
    psi, w = _encoded_pair(ghz_state(n), g, cfg.theta0)

    if cfg.protocol == "fig2_phase_digital":
        if cfg.L_grid is None:
            raise ConfigError("missing key: L_grid")

        def one_depth(layers: int):
            t0 = time.monotonic()
            phi = brickwork_kernel(np.array(psi), n, int(layers))
            wv = brickwork_kernel(np.array(w), n, int(layers))
            rows = []
            for k in cfg.k_list:
                part = _loss_bipartition(cfg, k, 0)
                val = qfi_from_reduced_vectors(phi, wv, part).value
                entropy, rank = _schmidt_stats(phi, part)
                rows.append(ResultRow(protocol=cfg.protocol, n=n, k=k, l=int(layers),
                                      sample=0, realization=0,
                                      qfi=val, qfi_ratio=val / ref,
                                      entropy_bits=entropy, schmidt_rank=rank))
            _timed(f"fig2 phase L={layers}", t0)
            return rows

        chunks = _pmap(one_depth, cfg.L_grid, threads)
        return sorted((r for c in chunks for r in c), key=ResultRow.sort_key)

    if cfg.protocol != "fig2_phase_analog":
        raise ConfigError(f"run_fig2_phase expects a fig2_phase protocol, got {cfg.protocol}")
    if cfg.t_grid is None:
        raise ConfigError("missing key: t_grid")
    times = [float(v) for v in cfg.t_grid]
    order = sorted(range(len(times)), key=lambda i: times[i])

    def one_realization(r: int):
        t0 = time.monotonic()
        seed = derive_seed(cfg.master_seed, STREAM_DISORDER, r)
        fields = xx_fields(n, seed)
        cur_phi, cur_w = np.array(psi), np.array(w)
        reached = 0.0
        rows = []
        for gi in order:
            cur_phi = evolve_vector(cur_phi, fields, times[gi] - reached)
            cur_w = evolve_vector(cur_w, fields, times[gi] - reached)
            reached = times[gi]
            for k in cfg.k_list:
                part = _loss_bipartition(cfg, k, r)
                val = qfi_from_reduced_vectors(cur_phi, cur_w, part).value
                entropy, rank = _schmidt_stats(cur_phi, part)
                rows.append(ResultRow(protocol=cfg.protocol, n=n, k=k, t=times[gi],
                                      sample=0, realization=r, seed=seed,
                                      qfi=val, qfi_ratio=val / ref,
                                      entropy_bits=entropy, schmidt_rank=rank))
        _timed(f"fig2 phase realization {r}", t0)
        return rows

    chunks = _pmap(one_realization, range(cfg.realizations), threads)
    return sorted((r for c in chunks for r in c), key=ResultRow.sort_key)


def run_fig3(cfg: RunConfig, threads: int = 1):
    """Twisting sweep: loss response of twisted probes, bare (t = 0 rows) and
    after chaotic-chain scrambling (t = time_t rows, one per realization)."""
    n = cfg.n_qubits
    if cfg.protocol != "fig3_oat":
        raise ConfigError(f"run_fig3 expects protocol fig3_oat, got {cfg.protocol}")
    if cfg.tau_grid is None:
        raise ConfigError("missing key: tau_grid")
    if cfg.scrambler.kind != "xx_chain":
        raise ConfigError(f"fig3_oat needs an xx_chain scrambler, got {cfg.scrambler.kind}")
    t_scr = float(cfg.scrambler.time_t)
    g = GeneratorSpec("x", n)
    ref = qfi_pure(oat_state(n, math.pi / 4), g).value  # Heisenberg cap

    def one_tau(item):
        ti, tau = item
        t0 = time.monotonic()
        psi, w = _encoded_pair(oat_state(n, float(tau)), g, cfg.theta0)
        rows = []
        for k in cfg.k_list:
            part = _loss_bipartition(cfg, k, ti)
            val = qfi_from_reduced_vectors(psi, w, part).value
            entropy, rank = _schmidt_stats(psi, part)
            rows.append(ResultRow(protocol=cfg.protocol, n=n, k=k, t=0.0, tau=float(tau),
                                  sample=0, realization=0,
                                  qfi=val, qfi_ratio=val / ref,
                                  entropy_bits=entropy, schmidt_rank=rank))
        for r in range(cfg.realizations):
            seed = derive_seed(cfg.master_seed, STREAM_DISORDER, r)
            fields = xx_fields(n, seed)
            phi = evolve_vector(psi, fields, t_scr)
            wv = evolve_vector(w, fields, t_scr)
            for k in cfg.k_list:
                part = _loss_bipartition(cfg, k, ti)
                val = qfi_from_reduced_vectors(phi, wv, part).value
                entropy, rank = _schmidt_stats(phi, part)
                rows.append(ResultRow(protocol=cfg.protocol, n=n, k=k, t=t_scr, tau=float(tau),
                                      sample=0, realization=r, seed=seed,
                                      qfi=val, qfi_ratio=val / ref,
                                      entropy_bits=entropy, schmidt_rank=rank))
        _timed(f"fig3 tau={tau}", t0)
        return rows

    chunks = _pmap(one_tau, list(enumerate(cfg.tau_grid)), threads)
    return sorted((r for c in chunks for r in c), key=ResultRow.sort_key)


def run_protocol(cfg: RunConfig, threads: int = 1):
    runner = {
        "fig1_haar": run_fig1,
        "fig2_entropy": run_fig2_entropy,
        "fig2_phase_digital": run_fig2_phase,
        "fig2_phase_analog": run_fig2_phase,
        "fig3_oat": run_fig3,
    }[cfg.protocol]
    return runner(cfg, threads=threads)


def expected_row_count(cfg: RunConfig) -> int:
    """Grid cardinality the pipeline must emit, checked by tests."""
    n, ks = cfg.n_qubits, cfg.k_list
    if cfg.protocol == "fig1_haar":
        analytic = len(ks) + sum(1 for k in ks if 2 * k == n)
        return cfg.samples * len(ks) + analytic
    if cfg.protocol == "fig2_entropy":
        grid = cfg.L_grid if cfg.scrambler.kind == "brickwork" else cfg.t_grid
        reals = 1 if cfg.scrambler.kind == "brickwork" else cfg.realizations
        return len(_entropy_sweep_sizes(cfg)) * len(grid) * reals
    if cfg.protocol == "fig2_phase_digital":
        return len(cfg.L_grid) * len(ks)
    if cfg.protocol == "fig2_phase_analog":
        return len(cfg.t_grid) * len(ks) * cfg.realizations
    return len(cfg.tau_grid) * len(ks) * (1 + cfg.realizations)
