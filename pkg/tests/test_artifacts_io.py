import json

import numpy as np
import pytest

from pigsolve.artifacts_io import (
    Cell,
    FingerprintMismatch,
    export_policy,
    export_policy_map,
    export_value_table,
    load_policy,
    load_value_table,
    policy_map_grid,
    write_bytes,
)
from pigsolve.baselines import hold_at_policy
from pigsolve.pig_rules import GameConfig, State, build_game
from pigsolve.solve import extract_policy, layered_solve


@pytest.fixture(scope="module")
def solved50():
    cfg = GameConfig("classic", 50)
    g = build_game(cfg)
    v = layered_solve(g)
    return cfg, g, v, extract_policy(g, v)


def parse_pgm(data):
    assert data[:3] == b"P5\n"
    lines = data.split(b"\n", 4)
    comment = lines[1].decode()
    w, h = map(int, lines[2].split())
    assert lines[3] == b"255"
    pix = np.frombuffer(lines[4], dtype=np.uint8)
    assert pix.size == w * h
    return comment, pix.reshape(h, w)


@pytest.mark.parametrize("fmt", ["text", "bin"])
def test_value_table_round_trip(solved50, fmt, tmp_path):
    cfg, _, v, _ = solved50
    data = export_value_table(v, fmt)
    path = write_bytes(tmp_path / f"v.{fmt}", data)
    back = load_value_table(path, expected_config=cfg)
    assert np.array_equal(back.values, v.values)
    assert back.config == cfg and back.tol == v.tol and back.method == v.method
    assert export_value_table(back, fmt) == data


def test_policy_round_trip(solved50, tmp_path):
    cfg, _, _, pol = solved50
    data = export_policy(pol)
    back = load_policy(write_bytes(tmp_path / "p.json", data), expected_config=cfg)
    assert np.array_equal(back.actions, pol.actions)
    assert back.fingerprint() == pol.fingerprint()
    assert export_policy(back) == data


def test_exports_are_byte_stable(solved50):
    cfg, g, v, pol = solved50
    again = layered_solve(g)
    assert export_value_table(again, "bin") == export_value_table(v, "bin")
    assert export_policy(extract_policy(g, again)) == export_policy(pol)
    for fmt in ("csv", "pgm", "json"):
        assert export_policy_map(pol, 1, 10, fmt) == export_policy_map(pol, 1, 10, fmt)


def test_edited_target_rejected(solved50):
    _, _, v, pol = solved50
    text = export_value_table(v, "text").decode()
    tampered = text.replace('"target":50', '"target":51', 1)
    assert tampered != text
    with pytest.raises(FingerprintMismatch):
        load_value_table(tampered.encode())
    doc = json.loads(export_policy(pol))
    doc["meta"]["config"]["target"] = 49
    with pytest.raises(FingerprintMismatch):
        load_policy(json.dumps(doc).encode())


def test_wrong_expected_config_rejected(solved50):
    _, _, v, pol = solved50
    with pytest.raises(FingerprintMismatch):
        load_value_table(export_value_table(v, "bin"), expected_config=GameConfig("maxdiff", 50))
    with pytest.raises(FingerprintMismatch):
        load_policy(export_policy(pol), expected_config=GameConfig("classic", 60))


def test_garbage_rejected():
    with pytest.raises(ValueError):
        load_value_table(b"hello world")
    with pytest.raises(ValueError):
        load_value_table(b"")


def test_grid_agrees_with_engine(solved50):
    cfg, _, _, pol = solved50
    rng = np.random.default_rng(11)
    for _ in range(100):
        player = int(rng.integers(1, 3))
        opp = int(rng.integers(0, 50))
        grid = policy_map_grid(pol, player, opp)
        own = int(rng.integers(0, 49))  # own=49 has no decision tau
        tau = int(rng.integers(1, 50 - own))
        s = State.play(1, own, opp, tau) if player == 1 else State.play(2, opp, own, tau)
        want = Cell.ROLL if pol.action_at(s).value == 1 else Cell.STOP
        assert grid.cell(own, tau) is want


def test_grid_cell_kinds(solved50):
    cfg, _, _, pol = solved50
    grid = policy_map_grid(pol, 1, 0)
    assert grid.cell(10, 0) is Cell.FORCED_ROLL
    assert grid.cell(45, 5) is Cell.FORCED_STOP
    assert grid.cell(45, 10) is Cell.FORCED_STOP
    assert grid.cell(45, 11) is Cell.NOT_A_STATE
    assert grid.cell(49, 6) is Cell.FORCED_STOP
    assert grid.cell(49, 7) is Cell.NOT_A_STATE
    assert grid.taus[0] == cfg.tau_max(0) and grid.taus[-1] == 0


def test_pgm_header_and_gray_levels(solved50):
    cfg, _, _, pol = solved50
    comment, pix = parse_pgm(export_policy_map(pol, 2, 17, "pgm"))
    assert comment.startswith("# pigsolve policy-map")
    assert f"fingerprint={pol.fingerprint()}" in comment
    assert "player=2" in comment and "opponent_score=17" in comment
    assert set(np.unique(pix)) <= {0, 128, 255}
    grid = policy_map_grid(pol, 2, 17)
    gray = {Cell.ROLL: 128, Cell.FORCED_ROLL: 128, Cell.STOP: 0, Cell.FORCED_STOP: 0, Cell.NOT_A_STATE: 255}
    for r, tau in enumerate(grid.taus):
        for own in grid.owns:
            assert pix[r, own] == gray[grid.cell(own, tau)]


def test_csv_layout(solved50):
    _, _, _, pol = solved50
    rows = export_policy_map(pol, 1, 0, "csv").decode().splitlines()
    head = rows[0].split(",")
    assert head[0] == "tau/alpha" and head[1:] == [str(a) for a in range(50)]
    last = rows[-1].split(",")
    assert last[0] == "0" and set(last[1:]) == {"FR"}
    assert export_policy_map(pol, 2, 0, "csv").decode().startswith("tau/beta,")


def test_json_map(solved50):
    _, _, _, pol = solved50
    doc = json.loads(export_policy_map(pol, 1, 3, "json"))
    assert doc["meta"]["kind"] == "policy-map" and doc["meta"]["opponent_score"] == 3
    assert len(doc["cells"]) == len(doc["taus"])
    assert {c for row in doc["cells"] for c in row} <= {c.value for c in Cell}


def test_map_argument_checks(solved50):
    cfg, _, _, pol = solved50
    for bad in (-1, 50, 200):
        with pytest.raises(ValueError):
            export_policy_map(pol, 1, bad)
    with pytest.raises(ValueError):
        export_policy_map(pol, 3, 0)
    with pytest.raises(ValueError):
        export_policy_map(pol, 1, 0, "png")


def test_baseline_policy_maps(solved50):
    cfg = solved50[0]
    grid = policy_map_grid(hold_at_policy(cfg, 20), 1, 7)
    assert grid.cell(0, 19) is Cell.ROLL and grid.cell(0, 20) is Cell.STOP
    assert grid.fingerprint is None or isinstance(grid.fingerprint, str)
