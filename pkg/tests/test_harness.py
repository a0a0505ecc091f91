import csv
import json

import numpy as np
import pytest

from oranslice.drl import PPOConfig
from oranslice.e2lite import UeRecord
from oranslice.exceptions import ConfigurationError
from oranslice.harness import (
    ExperimentSummary,
    ScenarioConfig,
    action_distribution,
    compare_policies,
    compute_cdf,
    desk_scenario,
    report,
    run_experiment,
    spectral_efficiency,
    sweep_schedule,
    train_bandit,
    train_offline,
)
from oranslice.harness.cli import main, parse_seeds
from oranslice.harness.config import parse_mode
from oranslice.harness.training import TrainingOptions
from oranslice.ran.phy import BYTES_PER_PRB
from oranslice.ran.types import SchedulingPolicy, SliceType
from oranslice.sim.engine import KpiReport


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def se_report(thr, prbs):
    return KpiReport(1, 0, SliceType.EMBB, 0, 500, SchedulingPolicy.RR, prbs,
                     (UeRecord(0, dl_thr_bps=int(thr)),) if thr is not None else ())


@pytest.fixture(scope="module")
def tiny_catalog(tmp_path_factory):
    out = tmp_path_factory.mktemp("train")
    ppo = PPOConfig(horizon=16, minibatch=8)
    res = train_offline(desk_scenario(), ppo, 3, out, TrainingOptions(episode_ms=4000, checkpoint_every=2))
    return out, res


# ---------------------------------------------------------------------------- config

def test_scenario_round_trip(tmp_path):
    cfg = desk_scenario(seed=7, duration_ms=9000)
    cfg.save(tmp_path / "s.json")
    back = ScenarioConfig.load(tmp_path / "s.json")
    assert back.to_dict() == cfg.to_dict()
    assert back.n_prbs == 15 and back.n_windows == 18


def test_scenario_validation():
    cfg = desk_scenario()
    with pytest.raises(ConfigurationError):
        cfg.replace(duration_ms=0).validate()
    with pytest.raises(ConfigurationError):
        parse_mode("static:xx")
    with pytest.raises(ConfigurationError):
        parse_mode("magic")
    assert parse_mode("static:wf") == ("static", SchedulingPolicy.WF)
    assert parse_mode("drl:/tmp/c") == ("drl", "/tmp/c")


def test_sweep_schedule():
    sched = sweep_schedule(15, [0, 1, 2])
    assert len(sched.entries) == 30
    t0, first = sched.entries[0]
    assert t0 == 0 and first == {0: 2, 1: 6, 2: 7}
    for _, q in sched.entries:
        assert sum(q.values()) == 15 and min(q.values()) >= 2
    visited = {q[0] for _, q in sched.entries}
    assert visited == set(range(2, 12))
    assert [t for t, _ in sched.entries] == list(range(0, 120_000, 4000))


def test_paper_scale_scenario_runs():
    cfg = desk_scenario(paper_scale=True, duration_ms=1000)
    assert len(cfg.base_stations) == 4
    s = run_experiment(cfg)
    by_bs = {}
    for r in s.trace.reports:
        by_bs.setdefault(r.bs_id, set()).update(u.ue_id for u in r.records)
    assert len(by_bs) == 4 and all(len(v) == 10 for v in by_bs.values())
    assert len(s.trace.reports) == 4 * 3 * 2


# ---------------------------------------------------------------------------- experiments

def test_static_rr_cadence(tmp_path):
    cfg = desk_scenario(duration_ms=60_000)
    s = run_experiment(cfg, tmp_path, mode="static:rr", seed=1)
    data = rows(tmp_path / "dataset.csv")
    assert len(data) == 120 * 10
    assert len({(r["timestamp_ms"], r["slice_id"]) for r in data}) == 120 * 3
    assert s.controls == 0 and s.n_windows == 120
    ts = [int(r["timestamp_ms"]) for r in data]
    assert ts == sorted(ts)
    assert sum(len(v) for v in s.buffer_bytes.values()) == 120 * 3
    assert set(json.loads((tmp_path / "summary.json").read_text())) >= {"spectral_efficiency", "action_counts"}


def test_determinism_byte_identical(tmp_path):
    cfg = desk_scenario(duration_ms=10_000)
    for d in ("a", "b"):
        run_experiment(cfg, tmp_path / d, mode="static:pf", seed=3)
    assert (tmp_path / "a/dataset.csv").read_bytes() == (tmp_path / "b/dataset.csv").read_bytes()


def test_drl_mode_deterministic_and_threaded(tmp_path, tiny_catalog):
    cat, _ = tiny_catalog
    cfg = desk_scenario(duration_ms=5000)
    mode = f"drl:{cat / 'catalog'}"
    a = run_experiment(cfg, tmp_path / "a", mode=mode, seed=2)
    run_experiment(cfg, tmp_path / "b", mode=mode, seed=2)
    assert (tmp_path / "a/dataset.csv").read_bytes() == (tmp_path / "b/dataset.csv").read_bytes()
    assert a.counters["indications"] == 30 and a.counters.get("xapp_errors", 0) == 0
    assert sum(sum(v) for v in a.action_counts.values()) == 30
    assert a.controls == a.counters["control_acks"]
    t = run_experiment(cfg, tmp_path / "t", mode=mode, seed=2, deterministic=False)
    assert len(rows(tmp_path / "t/dataset.csv")) == 10 * 10
    assert t.counters["indications"] == 30


def test_drl_mode_unreachable_ric(tmp_path, tiny_catalog):
    import socket

    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    with pytest.raises(ConnectionError):
        run_experiment(desk_scenario(duration_ms=1000), tmp_path, mode="drl:x", ric_address=("127.0.0.1", port))
    assert not (tmp_path / "summary.json").exists()


# ---------------------------------------------------------------------------- metrics & reports

def test_spectral_efficiency_examples():
    assert spectral_efficiency(se_report(1e6, 5)) == pytest.approx(1e6 / 9e5)
    assert spectral_efficiency(se_report(None, 5)) == 0
    assert spectral_efficiency(se_report(1e6, 0)) is None
    for prbs in (1, 5, 15):
        cap = BYTES_PER_PRB[15] * 8 * 1000 * prbs
        assert spectral_efficiency(se_report(cap, prbs)) == pytest.approx(4.622, abs=1e-3)


def test_cdf_examples():
    cdf = dict(compute_cdf([1, 2, 2, 4]))
    assert cdf[2] == 0.75 and cdf[4] == 1.0 and cdf[1] == 0.25
    assert compute_cdf([3.5]) == [(3.5, 1.0)]
    assert compute_cdf([4, 2, 1, 2]) == compute_cdf([1, 2, 2, 4])
    with pytest.raises(ValueError):
        compute_cdf([])


def test_action_distribution_examples():
    s = ExperimentSummary("drl", 1, action_counts={"EMBB/5": [0, 99, 1], "URLLC/3": [0, 0, 7], "MTC/2": [0, 0, 0]})
    table = action_distribution(s)
    assert table[("EMBB", 5)] == pytest.approx((0.0, 0.99, 0.01))
    assert table[("URLLC", 3)] == (0.0, 0.0, 1.0)
    assert ("MTC", 2) not in table
    assert all(sum(v) == pytest.approx(1) for v in table.values())


def test_compare_paired_and_files(tmp_path):
    cfg = desk_scenario(duration_ms=8000)
    doc = compare_policies(cfg, ["static:rr", "static:pf"], [4], tmp_path)
    rr = rows(tmp_path / "static-rr/seed4/dataset.csv")
    pf = rows(tmp_path / "static-pf/seed4/dataset.csv")
    # paired seeds: same UEs and channel realizations in both modes
    for r in (rr, pf):
        assert len(r) == 16 * 10
    assert [(a["ue_id"], a["sinr_db"]) for a in rr] == [(b["ue_id"], b["sinr_db"]) for b in pf]
    files = sorted(p.name for p in (tmp_path / "cdf").iterdir())
    assert files == sorted(f"{m}_{st}.csv" for m in ("static-rr", "static-pf") for st in ("EMBB", "MTC", "URLLC"))
    assert set(doc["modes"]) == {"static:rr", "static:pf"}
    with pytest.raises(ValueError):
        compare_policies(cfg, ["static:rr"], [1], tmp_path)


def test_compare_deltas_definition(tmp_path, tiny_catalog):
    cat, _ = tiny_catalog
    cfg = desk_scenario(duration_ms=4000)
    modes = ["static:rr", "static:wf", f"drl:{cat / 'catalog'}"]
    doc = compare_policies(cfg, modes, [1], tmp_path)
    d = doc["deltas"]["EMBB"]
    best = d["se_median_best_static"]
    drl = doc["modes"][modes[2]]["EMBB"]["se_median"]
    ref = doc["modes"][best]["EMBB"]["se_median"]
    assert d["se_median_delta"] == pytest.approx((drl - ref) / ref)
    assert ref == max(doc["modes"][m]["EMBB"]["se_median"] for m in modes[:2])
    assert "reference_deltas" in doc
    again = report(tmp_path)
    assert again["deltas"] == doc["deltas"]
    table = rows(tmp_path / "action_distribution_drl.csv")
    for r in table:
        assert sum(float(r[f"p_{p.name}"]) for p in SchedulingPolicy) == pytest.approx(1, abs=1e-5)
    assert (tmp_path / "table.csv").exists()


# ---------------------------------------------------------------------------- training

def test_train_zero_episodes(tmp_path):
    with pytest.raises(ConfigurationError):
        train_offline(desk_scenario(), PPOConfig(), 0, tmp_path)
    with pytest.raises(ConfigurationError):
        train_bandit(PPOConfig(), 0)


def test_training_outputs(tiny_catalog):
    out, res = tiny_catalog
    names = sorted(p.name for p in (out / "catalog").iterdir())
    assert names == sorted(
        [f"{t}-ep{e:04d}.json" for t in ("embb", "urllc", "mtc") for e in (2, 3)] + ["deployed.json"]
    )
    assert res.deployed == {SliceType.EMBB: "embb-ep0003", SliceType.URLLC: "urllc-ep0003",
                            SliceType.MTC: "mtc-ep0003"}
    curve = rows(out / "training_curve.csv")
    assert len(curve) == 3 and set(curve[0]) == {"episode", "mean_reward_EMBB", "mean_reward_URLLC",
                                                 "mean_reward_MTC"}
    assert not res.halted


def test_training_halts_on_divergence(tmp_path, monkeypatch):
    import oranslice.drl.agent as agent_mod

    def broken(policy, value, traj, cfg, rng, *a, **k):
        return policy, value, {"aborted": True, "loss": float("nan")}

    monkeypatch.setattr(agent_mod, "ppo_update", broken)
    ppo = PPOConfig(horizon=8, minibatch=8)
    res = train_offline(desk_scenario(), ppo, 10, tmp_path, TrainingOptions(episode_ms=5000, checkpoint_every=1))
    assert res.halted and res.episodes_run == 2
    assert res.deployed[SliceType.EMBB] == "embb-ep0002"


def test_bandit_curve_increases():
    ppo = PPOConfig()
    for seed in range(5):
        curve, agent = train_bandit(ppo, 30, seed=seed)
        assert curve[-1][1] > curve[0][1]
        assert agent.predict_proba(np.full((1, 24), 0.5))[0, 1] > 0.9


# ---------------------------------------------------------------------------- CLI

def test_parse_seeds():
    assert parse_seeds("1-3,7") == [1, 2, 3, 7]
    assert parse_seeds("5") == [5]


def test_cli_smoke(tmp_path, capsys):
    scen = tmp_path / "desk.json"
    assert main(["scenario", "desk", "--out", str(scen)]) == 0
    assert main(["run", "--scenario", str(scen), "--mode", "static:wf", "--seed", "2",
                 "--duration-ms", "2000", "--out", str(tmp_path / "run")]) == 0
    assert len(rows(tmp_path / "run/dataset.csv")) == 4 * 10
    assert main(["report", "--in", str(tmp_path / "run")]) == 0
    assert (tmp_path / "run/cdf/static-wf_EMBB.csv").exists()
    ppo = tmp_path / "ppo.json"
    ppo.write_text(json.dumps({"horizon": 32, "training": {"seed": 3}}))
    assert main(["train", "--scenario", "bandit", "--ppo", str(ppo), "--episodes", "3",
                 "--out", str(tmp_path / "bandit")]) == 0
    assert (tmp_path / "bandit/catalog/deployed.json").exists()
    assert main(["compare", "--scenario", "desk", "--modes", "static:rr,static:pf", "--seeds", "1-2",
                 "--duration-ms", "1000", "--out", str(tmp_path / "cmp")]) == 0
    assert (tmp_path / "cmp/comparison.json").exists()
    assert main(["run", "--scenario", str(scen), "--mode", "drl:" + str(tmp_path / "none"),
                 "--out", str(tmp_path / "x"), "--duration-ms", "1000"]) == 2
    assert "error:" in capsys.readouterr().err
