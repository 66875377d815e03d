import csv

import pytest

from cisg.cli import main, parse_seeds


def test_parse_seeds():
    assert parse_seeds("1..3") == [1, 2, 3]
    assert parse_seeds("4,9") == [4, 9]
    assert parse_seeds("7") == [7]
    with pytest.raises(ValueError):
        parse_seeds("5..1")


@pytest.mark.slow
def test_run_cycle2_sweep(tmp_path, games_dir):
    out = tmp_path / "results"
    code = main([
        "run", "--game", str(games_dir / "cycle2.cisg"), "--protocol", "case1",
        "--monitoring", "imperfect", "--t-mix", "2", "--epsilon", "0.25", "--delta", "0.1",
        "--gamma", "0.1", "--k1-override", "5", "--seed", "1..30", "--steps", "20000",
        "--oracle", "--out", str(out),
    ])
    assert code == 0
    rows = list(csv.DictReader(open(out / "summary.csv")))
    assert list(rows[0]) == ["seed", "steps", "final_avg", "v_opt", "target", "time_to_target", "switches"]
    assert len(rows) == 30
    assert {float(r["v_opt"]) for r in rows} == {0.5}
    assert (out / "seed-001" / "runlog.csv").exists()
    assert main(["replay", str(out / "seed-017" / "config.json")]) == 0


def test_case3_imperfect_rejected(tmp_path, games_dir, capsys):
    out = tmp_path / "r"
    code = main(["run", "--game", str(games_dir / "cycle2.cisg"), "--protocol", "case3",
                 "--monitoring", "imperfect", "--t-mix", "2", "--out", str(out)])
    assert code == 2
    assert "perfect monitoring" in capsys.readouterr().err
    assert not out.exists()


def test_case6_rejects_t_mix(tmp_path, games_dir):
    code = main(["run", "--game", str(games_dir / "cycle2.cisg"), "--protocol", "case6",
                 "--t-mix", "4", "--bound", "2", "--out", str(tmp_path / "r")])
    assert code == 2
    assert not (tmp_path / "r").exists()


def test_unreadable_game(tmp_path):
    assert main(["run", "--game", str(tmp_path / "nope.cisg"), "--protocol", "case6",
                 "--bound", "2"]) == 2


def test_oracle_cycle2(games_dir, capsys):
    assert main(["oracle", "--game", str(games_dir / "cycle2.cisg"), "--epsilon", "0.25"]) == 0
    out = capsys.readouterr().out
    assert "ergodic: yes" in out
    assert "v(M) = 0.5" in out
    assert "mixing time (epsilon=0.25): 2" in out


def test_oracle_single_state(games_dir, capsys):
    assert main(["oracle", "--game", str(games_dir / "matrix2.cisg")]) == 0
    assert "v(M) = 0.9" in capsys.readouterr().out


def test_oracle_non_ergodic(games_dir, capsys):
    assert main(["oracle", "--game", str(games_dir / "absorbing2.cisg")]) == 0
    out = capsys.readouterr().out
    assert "ergodic: no" in out and "witness policy" in out
    assert "v(M)" not in out
