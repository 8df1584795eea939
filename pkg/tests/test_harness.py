import json
from fractions import Fraction

import pytest
from conftest import bandit

from eluder_rl import io
from eluder_rl.cli import build_parser, config_from_args, main
from eluder_rl.errors import ConfigError
from eluder_rl.harness import (FEATURE_COLUMNS, RUN_COLUMNS, ExperimentConfig, apply_env_overrides,
                               run_experiment, summarize)
from eluder_rl.policy import Finite, Gf2Linear


def write(path, obj):
    path.write_text(json.dumps(obj, indent=2) + "\n")
    return path


def bandit_files(tmp_path, r0="1/4", r1="3/4", space=None):
    env = write(tmp_path / "env.json", io.env_to_dict(bandit(Fraction(r0), Fraction(r1))))
    sp = write(tmp_path / "space.json", io.space_to_dict(space or Gf2Linear(1, {(0, 0): 1})))
    return env, sp


def test_run_columns_are_stable():
    assert ",".join(RUN_COLUMNS) == "episode,event,reward,cum_regret,stack_depth,z_size"
    assert ",".join(FEATURE_COLUMNS) == "trial,length,bound,exceeded"


def test_missing_horizon_names_field_and_line(tmp_path, capsys):
    cfg = write(tmp_path / "c.json", {"subcommand": "adversary", "dimension": 7, "episodes": 4})
    assert main(["adversary", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "$.horizon" in err and f"{cfg}:1" in err


def test_bad_field_type_points_at_its_line(tmp_path, capsys):
    cfg = write(tmp_path / "c.json", {"subcommand": "adversary", "dimension": 7, "episodes": 4, "horizon": "x"})
    assert main(["adversary", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert f"{cfg}:5 $.horizon" in err


def test_run_det_writes_golden_header(tmp_path):
    env, sp = bandit_files(tmp_path)
    out = tmp_path / "o"
    assert main(["run-det", "--env", str(env), "--space", str(sp), "--episodes", "6", "--out", str(out)]) == 0
    lines = (out / "run-det-seed0.csv").read_text().splitlines()
    assert lines[0] == "episode,event,reward,cum_regret,stack_depth,z_size"
    assert len(lines) == 7
    summary = json.loads((out / "summary.json").read_text())
    assert summary[0]["ok"] and Fraction(summary[0]["margin"]) >= 0


def test_reruns_are_byte_identical(tmp_path):
    env, sp = bandit_files(tmp_path)
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert main(["run-stoch", "--env", str(env), "--space", str(sp), "--seed", "3", "--seed", "4",
                     "--out", str(out)]) == 0
        outs.append(out)
    for name in ("run-stoch-seed3.csv", "run-stoch-seed4.csv", "summary.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_jobs_do_not_change_output(tmp_path):
    base = {"subcommand": "run-det", "generator": {"kind": "random-det", "dimension": 3}, "seeds": [1, 2, 3],
            "episodes": 20}
    outs = []
    for jobs in (1, 3):
        out = tmp_path / f"j{jobs}"
        assert run_experiment(ExperimentConfig.from_dict(base | {"jobs": jobs, "out": str(out)})) == 0
        outs.append(out)
    for seed in (1, 2, 3):
        name = f"run-det-seed{seed}.csv"
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_contract_breach_exits_3(tmp_path):
    env, sp = bandit_files(tmp_path, "1/2", "1/2")  # tied arms: the optimal action is not unique
    assert main(["run-stoch", "--env", str(env), "--space", str(sp), "--out", str(tmp_path / "o")]) == 3


def test_audit_failure_exits_1(tmp_path):
    out = tmp_path / "o"
    env, sp = bandit_files(tmp_path)
    assert main(["run-det", "--env", str(env), "--space", str(sp), "--episodes", "4", "--out", str(out)]) == 0
    assert main(["audit", "--runs", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    summary[0]["ok"] = False
    write(out / "summary.json", summary)
    assert main(["audit", "--runs", str(out)]) == 1


def test_audit_catches_tampered_csv(tmp_path):
    out = tmp_path / "o"
    env, sp = bandit_files(tmp_path)
    main(["run-det", "--env", str(env), "--space", str(sp), "--episodes", "4", "--out", str(out)])
    csv_path = out / "run-det-seed0.csv"
    lines = csv_path.read_text().splitlines()
    cells = lines[-1].split(",")
    cells[3] = "9"
    csv_path.write_text("\n".join(lines[:-1] + [",".join(cells)]) + "\n")
    assert main(["audit", "--runs", str(out)]) == 1


def test_audit_of_corrupted_summary_is_config_error(tmp_path):
    (tmp_path / "summary.json").write_text("{not json")
    assert main(["audit", "--runs", str(tmp_path)]) == 2


def test_env_overrides(tmp_path, monkeypatch):
    data = apply_env_overrides({"subcommand": "adversary", "horizon": 2},
                               {"ELUDER_RL_HORIZON": "3", "ELUDER_RL_SEED": "7", "OTHER": "1"})
    assert data["horizon"] == 3 and data["seeds"] == [7] and "other" not in data
    cfg = write(tmp_path / "c.json", {"subcommand": "adversary", "dimension": 7, "episodes": 4, "horizon": 3})
    monkeypatch.setenv("ELUDER_RL_EPISODES", "5")
    args = build_parser().parse_args(["adversary", "--config", str(cfg), "--seed", "9"])
    parsed = config_from_args(args)
    assert parsed.get("episodes") == 5 and parsed.seeds == [9]
    args = build_parser().parse_args(["adversary", "--config", str(cfg), "--episodes", "6"])
    assert config_from_args(args).get("episodes") == 6


def test_summarize_empty():
    table, data = summarize([])
    assert table == "" and data == {"rows": [], "ok": True}


def test_summarize_adversary_row(tmp_path):
    out = tmp_path / "o"
    assert main(["adversary", "--dimension", "7", "--horizon", "3", "--episodes", "10", "--out", str(out)]) == 0
    table, data = summarize(out)
    (row,) = data["rows"]
    assert row["kind"] == "adversary" and row["ok"]
    assert Fraction(row["observed"]) >= Fraction(row["bound"]) and Fraction(row["margin"]) >= 0
    assert "adversary" in table
    frozen = io.load_env(out / "frozen-mdp-seed0.json")
    assert frozen.horizon == 3


def test_summarize_det_row_margin(tmp_path):
    out = tmp_path / "o"
    env, sp = bandit_files(tmp_path)
    main(["run-det", "--env", str(env), "--space", str(sp), "--episodes", "8", "--out", str(out)])
    (row,) = summarize(out)[1]["rows"]
    assert Fraction(row["margin"]) >= 0 and Fraction(row["observed"]) <= Fraction(row["bound"])


def test_dims_and_oracle_check(tmp_path):
    sp = write(tmp_path / "space.json", io.space_to_dict(Gf2Linear(3, {(i, 0): 1 << i for i in range(3)})))
    out = tmp_path / "o"
    cfg = write(tmp_path / "c.json", {"subcommand": "dims", "space": "space.json",
                                      "which": ["eluder", "littlestone"], "out": str(out)})
    assert main(["dims", "--config", str(cfg)]) == 0
    (s,) = json.loads((out / "summary.json").read_text())
    assert s["eluder"]["dimension"] == 3 and s["littlestone"]["dimension"] == 3
    assert main(["oracle-check", "--space", str(sp), "--queries", "30", "--out", str(out)]) == 0


def test_io_round_trip(tmp_path):
    mdp = bandit(Fraction(1, 3), Fraction(2, 3))
    io.dump_env(mdp, tmp_path / "e.json")
    back = io.load_env(tmp_path / "e.json")
    assert back.rewards == mdp.rewards and back.reward_bound == mdp.reward_bound
    space = Finite([{(0, 0): 0}, {(0, 0): 1}])
    io.dump_space(space, tmp_path / "s.json")
    assert io.load_space(tmp_path / "s.json").members() == space.members()


def test_env_errors_carry_location(tmp_path):
    bad = io.env_to_dict(bandit(0, 1))
    bad["rewards"][1][2] = 5  # epoch beyond the horizon
    path = write(tmp_path / "e.json", bad)
    with pytest.raises(ConfigError) as info:
        io.load_env(path)
    assert str(path) in str(info.value)


@pytest.mark.parametrize("space", [
    Finite([{(0, 0): 0, (1, 0): 1}, {(0, 0): 1, (1, 0): 1}]),
    Gf2Linear(2, {(0, 0): 1, (1, 0): 3}),
])
def test_space_round_trip_preserves_policies(space, tmp_path):
    io.dump_space(space, tmp_path / "s.json")
    back = io.load_space(tmp_path / "s.json")
    assert type(back) is type(space) and back.actions == space.actions
    table = lambda sp: sorted(tuple(sp.action(t, *p) for p in [(0, 0), (1, 0)]) for t in sp.members())  # noqa: E731
    assert table(back) == table(space)
