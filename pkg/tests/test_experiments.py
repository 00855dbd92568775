import json

import numpy as np
import pytest

from qfilock.experiments import (
    CSV_HEADER,
    ConfigError,
    ResultRow,
    RunConfig,
    config_to_dict,
    derive_seed,
    expected_row_count,
    parse_config,
    read_config,
    read_rows,
    run_fig1,
    run_fig2_entropy,
    run_fig2_phase,
    run_fig3,
    run_protocol,
    write_config,
    write_rows,
)
from qfilock.scramblers import ScramblerSpec


def haar_cfg(**kw):
    base = dict(
        n_qubits=6,
        protocol="fig1_haar",
        scrambler=ScramblerSpec(kind="haar", n_qubits=6),
        k_list=list(range(7)),
        samples=2,
        master_seed=11,
    )
    base.update(kw)
    return RunConfig(**base)


# ---------------------------------------------------------------------------
# seeds


def test_derive_seed_deterministic():
    assert derive_seed(7, 1, 2) == derive_seed(7, 1, 2)
    assert derive_seed(7, 1, 2) != derive_seed(7, 2, 1)


def test_derive_seed_golden():
    # recorded at first run; the derivation scheme is documented and stable
    assert derive_seed(1234, 0, 0) == 9934482187592710006


def test_derive_seed_no_collisions():
    rng = np.random.default_rng(0)
    masters = rng.integers(0, 2 ** 63, size=1_000_000)
    a = {derive_seed(int(s), 0) for s in masters[:2000]}
    assert len(a) == 2000
    # full scan on the (s,0) vs (s,1) pair
    for s in masters:
        if derive_seed(int(s), 0) == derive_seed(int(s), 1):
            raise AssertionError(f"collision at {s}")


# ---------------------------------------------------------------------------
# config parsing


def test_config_round_trip(tmp_path):
    cfg = haar_cfg(output_path="out.csv", theta0=0.25)
    path = tmp_path / "cfg.json"
    write_config(cfg, path)
    assert read_config(str(path)) == cfg


def test_config_rejects_unknown_key():
    doc = config_to_dict(haar_cfg())
    doc["bogus_key"] = 1
    with pytest.raises(ConfigError, match="bogus_key"):
        parse_config(doc)


def test_config_rejects_unknown_scrambler_key():
    doc = config_to_dict(haar_cfg())
    doc["scrambler"]["whatever"] = 1
    with pytest.raises(ConfigError, match="scrambler.whatever"):
        parse_config(doc)


def test_config_rejects_empty_k_list():
    doc = config_to_dict(haar_cfg())
    doc["k_list"] = []
    with pytest.raises(ConfigError, match="k_list"):
        parse_config(doc)


def test_config_rejects_bad_k():
    with pytest.raises(ConfigError):
        haar_cfg(k_list=[0, 9])


def test_config_rejects_bad_protocol():
    doc = config_to_dict(haar_cfg())
    doc["protocol"] = "fig9"
    with pytest.raises(ConfigError, match="protocol"):
        parse_config(doc)


def test_read_config_names_json_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        read_config(str(path))


# ---------------------------------------------------------------------------
# CSV output


def test_csv_header_golden():
    assert CSV_HEADER == ("protocol,N,K,L,t,tau,sample,realization,seed,"
                          "qfi,qfi_ratio,entropy_bits,schmidt_rank")


def test_write_rows_round_trip(tmp_path):
    rows = [
        ResultRow(protocol="fig1_haar", n=4, k=1, sample=0, realization=0,
                  seed=3, qfi=3.5, qfi_ratio=0.875, entropy_bits=1.0, schmidt_rank=2),
        ResultRow(protocol="fig1_haar", n=4, k=0, sample=-1, realization=-1,
                  qfi=4.0, qfi_ratio=1.0),
    ]
    path = tmp_path / "rows.csv"
    write_rows(rows, str(path))
    text = path.read_text()
    assert text.splitlines()[0] == CSV_HEADER
    back = read_rows(str(path))
    assert back[0].k == 0 and back[0].sample == -1 and back[0].l is None
    assert back[1].qfi == 3.5


def test_write_rows_no_partial_file_on_failure(tmp_path):
    path = tmp_path / "rows.csv"
    rows = [ResultRow(protocol="fig1_haar", n=4, k=0), object()]
    with pytest.raises(AttributeError):
        write_rows(rows, str(path))
    assert not path.exists()
    assert not list(tmp_path.glob("*.tmp"))


# ---------------------------------------------------------------------------
# pipelines: structure and determinism


def test_fig1_row_count_and_bounds():
    cfg = haar_cfg()
    rows = run_fig1(cfg)
    assert len(rows) == expected_row_count(cfg)
    for row in rows:
        if row.sample is not None and row.sample >= 0:
            assert -1e-12 <= row.qfi_ratio <= 1 + 1e-8
            assert abs(row.qfi_ratio - row.qfi / 6.0) < 1e-12


def test_fig1_k_zero_and_full_loss():
    rows = run_fig1(haar_cfg())
    for row in rows:
        if row.sample is None or row.sample < 0:
            continue
        if row.k == 0:
            assert abs(row.qfi_ratio - 1.0) < 1e-8
        if row.k == 6:
            assert row.qfi_ratio == 0.0


def test_fig1_analytic_rows():
    rows = run_fig1(haar_cfg())
    analytic = [r for r in rows if r.sample == -1]
    # one branch per K plus a second at the half cut
    assert len(analytic) == 8
    half = [r for r in analytic if r.k == 3]
    assert {r.realization for r in half} == {-1, -2}
    k0 = [r for r in analytic if r.k == 0]
    assert len(k0) == 1 and abs(k0[0].qfi_ratio - 1.0) < 1e-12


def test_fig1_mean_ratio_monotone_in_k():
    cfg = haar_cfg(samples=4)
    rows = run_fig1(cfg)
    means = []
    for k in cfg.k_list:
        vals = [r.qfi_ratio for r in rows if r.k == k and r.sample >= 0]
        means.append(np.mean(vals))
    for a, b in zip(means, means[1:]):
        assert b <= a + 0.05


def test_fig1_deterministic_output(tmp_path):
    cfg = haar_cfg(samples=2)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_rows(run_fig1(cfg), str(p1))
    write_rows(run_fig1(cfg), str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_fig1_threads_match_serial():
    cfg = haar_cfg(samples=3)
    serial = run_fig1(cfg, threads=1)
    parallel = run_fig1(cfg, threads=2)
    assert serial == parallel


def test_fig1_seed_changes_samples_not_analytic():
    rows_a = run_fig1(haar_cfg(master_seed=1))
    rows_b = run_fig1(haar_cfg(master_seed=2))
    num_a = [r for r in rows_a if r.sample >= 0]
    num_b = [r for r in rows_b if r.sample >= 0]
    assert any(abs(a.qfi - b.qfi) > 1e-12 for a, b in zip(num_a, num_b))
    an_a = [(r.k, r.realization, r.qfi_ratio) for r in rows_a if r.sample == -1]
    an_b = [(r.k, r.realization, r.qfi_ratio) for r in rows_b if r.sample == -1]
    assert an_a == an_b


def test_fig1_refuses_oversized_system():
    with pytest.raises(ConfigError, match="brickwork"):
        run_fig1(haar_cfg(n_qubits=13, k_list=[0],
                          scrambler=ScramblerSpec(kind="haar", n_qubits=13)))


def test_fig1_random_traced_mode():
    cfg = haar_cfg(samples=2, traced_random=True)
    rows = run_fig1(cfg)
    assert len(rows) == expected_row_count(cfg)
    for row in rows:
        if row.sample is not None and row.sample >= 0:
            assert row.qfi_ratio <= 1 + 1e-8


# ---------------------------------------------------------------------------
# entropy pipeline


def entropy_cfg(kind, **kw):
    base = dict(
        n_qubits=8,
        protocol="fig2_entropy",
        scrambler=ScramblerSpec(kind=kind, n_qubits=8),
        k_list=[0],
        master_seed=5,
    )
    base.update(kw)
    return RunConfig(**base)


def test_fig2_entropy_digital():
    cfg = entropy_cfg("brickwork", L_grid=[0, 2, 8])
    rows = run_fig2_entropy(cfg)
    assert len(rows) == expected_row_count(cfg)
    for row in rows:
        if row.l == 0:
            assert abs(row.entropy_bits - 1.0) < 1e-9
            assert row.schmidt_rank == 2
    deep = [r for r in rows if r.n == 8 and r.l == 8]
    assert deep[0].entropy_bits > 2.5


def test_fig2_entropy_analog():
    cfg = entropy_cfg("xx_chain", t_grid=[0.0, 2.0], realizations=2, n_qubits=6)
    rows = run_fig2_entropy(cfg)
    assert len(rows) == expected_row_count(cfg)
    zero = [r for r in rows if r.t == 0.0]
    for row in zero:
        assert abs(row.entropy_bits - 1.0) < 1e-9
    late = [r for r in rows if r.t == 2.0 and r.n == 6]
    assert np.mean([r.entropy_bits for r in late]) > 1.2


def test_fig2_entropy_requires_grid():
    with pytest.raises(ConfigError, match="L_grid"):
        run_fig2_entropy(entropy_cfg("brickwork"))


# ---------------------------------------------------------------------------
# phase pipelines


def test_fig2_phase_digital_fragile_then_protected():
    cfg = RunConfig(
        n_qubits=8, protocol="fig2_phase_digital",
        scrambler=ScramblerSpec(kind="brickwork", n_qubits=8),
        k_list=[0, 1, 2], L_grid=[0, 10], master_seed=3,
    )
    rows = run_fig2_phase(cfg)
    assert len(rows) == expected_row_count(cfg)
    by = {(r.l, r.k): r for r in rows}
    assert by[(0, 1)].qfi_ratio < 1e-9
    assert abs(by[(0, 0)].qfi_ratio - 1.0) < 1e-8
    assert by[(10, 1)].qfi_ratio > 0.8
    for row in rows:
        assert row.qfi_ratio <= 1 + 1e-8


def test_fig2_phase_analog_runs():
    cfg = RunConfig(
        n_qubits=6, protocol="fig2_phase_analog",
        scrambler=ScramblerSpec(kind="xx_chain", n_qubits=6),
        k_list=[0, 1], t_grid=[0.0, 3.0], realizations=2, master_seed=9,
    )
    rows = run_fig2_phase(cfg)
    assert len(rows) == expected_row_count(cfg)
    by = {(r.t, r.k, r.realization): r for r in rows}
    assert by[(0.0, 1, 0)].qfi_ratio < 1e-9
    assert by[(3.0, 1, 0)].qfi_ratio > 0.1


def test_fig2_phase_analog_incremental_matches_direct():
    # incremental evolution through the time grid equals direct evolution
    from qfilock.qfi import GeneratorSpec, qfi_reduced
    from qfilock.scramblers import evolve_vector, xx_fields
    from qfilock.statevec import Bipartition, ghz_state

    cfg = RunConfig(
        n_qubits=6, protocol="fig2_phase_analog",
        scrambler=ScramblerSpec(kind="xx_chain", n_qubits=6),
        k_list=[1], t_grid=[1.0, 2.5], realizations=1, master_seed=21,
    )
    rows = run_fig2_phase(cfg)
    late = [r for r in rows if r.t == 2.5][0]
    fields = xx_fields(6, derive_seed(21, 1, 0))
    direct = qfi_reduced(
        ghz_state(6), GeneratorSpec("z", 6),
        lambda v: evolve_vector(v, fields, 2.5),
        Bipartition.trace_highest(6, 1),
    )
    assert abs(late.qfi - direct.value) < 1e-7 * max(direct.value, 1.0)


# ---------------------------------------------------------------------------
# twisting pipeline


def fig3_cfg(**kw):
    base = dict(
        n_qubits=6,
        protocol="fig3_oat",
        scrambler=ScramblerSpec(kind="xx_chain", n_qubits=6, time_t=5.0),
        k_list=[0, 1, 2],
        tau_grid=[0.0, np.pi / 4],
        realizations=2,
        master_seed=17,
    )
    base.update(kw)
    return RunConfig(**base)


def test_fig3_rows_and_limits():
    cfg = fig3_cfg()
    rows = run_fig3(cfg)
    assert len(rows) == expected_row_count(cfg)
    by = {(r.tau, r.t, r.k, r.realization): r for r in rows}
    n = cfg.n_qubits
    # bare quarter-turn probe: Heisenberg value, destroyed by one loss
    assert abs(by[(np.pi / 4, 0.0, 0, 0)].qfi - n ** 2) < 1e-8 * n ** 2
    assert by[(np.pi / 4, 0.0, 1, 0)].qfi < 1e-6 * n ** 2
    # scrambling restores protection
    scr = [by[(np.pi / 4, 5.0, 1, r)].qfi_ratio for r in range(2)]
    assert np.mean(scr) > 0.5
    for row in rows:
        assert row.qfi_ratio <= 1 + 1e-8


def test_fig3_requires_chain_scrambler():
    with pytest.raises(ConfigError, match="xx_chain"):
        run_fig3(fig3_cfg(scrambler=ScramblerSpec(kind="haar", n_qubits=6)))


def test_run_protocol_dispatch():
    cfg = haar_cfg(samples=1, k_list=[0, 3])
    assert run_protocol(cfg) == run_fig1(cfg)
