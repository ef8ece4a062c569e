import pytest

from pigsolve import GameConfig, build_game, extract_policy, layered_solve, value_iteration


@pytest.fixture(scope="session")
def small_classic():
    cfg = GameConfig("classic", 20)
    game = build_game(cfg)
    v, report = value_iteration(game)
    return cfg, game, v, report


@pytest.fixture(scope="session")
def classic200():
    cfg = GameConfig("classic", 200)
    game = build_game(cfg)
    return cfg, game


@pytest.fixture(scope="session")
def classic200_layered(classic200):
    cfg, game = classic200
    v = layered_solve(game)
    return v, extract_policy(game, v)


@pytest.fixture(scope="session")
def classic200_vi(classic200):
    cfg, game = classic200
    return value_iteration(game, tol=1e-10)
