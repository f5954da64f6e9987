import math
import os
from pathlib import Path

import numpy as np
import pytest

import fluidmc

MODELS = Path(os.environ.get("FLUIDMC_MODELS_DIR", Path(__file__).resolve().parents[2] / "models"))


@pytest.fixture(scope="module")
def two_state():
    return fluidmc.load_model(MODELS / "two_state.fmc")


@pytest.fixture(scope="module")
def bike():
    return fluidmc.load_model(MODELS / "bike.fmc")


def test_model_metadata(bike):
    assert bike.name == "bike"
    assert bike.states == ["a", "b", "sb", "ss", "d"]
    assert "cost" in bike.rewards
    assert "at_d" in bike.labels
    assert "bike" in repr(bike)


def test_fluid_closed_form(two_state):
    grid = [0.0, 0.5, 1.0]
    x = fluidmc.fluid(two_state, grid)
    assert x.shape == (3, 2)
    on = [(1 + math.exp(-2 * t)) / 2 for t in grid]
    np.testing.assert_allclose(x[:, 0], on, atol=1e-8)
    np.testing.assert_allclose(x.sum(axis=1), 1.0, atol=1e-12)


def test_drift_matches_generator(bike):
    x = [0.4, 0.2, 0.1, 0.05, 0.25]
    q = bike.generator(x)
    np.testing.assert_allclose(np.asarray(x) @ q, bike.drift(x), atol=1e-12)
    np.testing.assert_allclose(q.sum(axis=1), 0.0, atol=1e-12)


def test_check_and_rewards(two_state):
    r = fluidmc.check(two_state, "P=? [ at_on U[0,1] at_off ]", "on")
    assert r["verdict"] == "value"
    assert r["value"] == pytest.approx(1 - math.exp(-1), abs=1e-7)
    assert fluidmc.check(two_state, "P>=0.5 [ X[0,1] at_off ]", "on")["verdict"] == "true"
    assert fluidmc.cumulative_reward(two_state, "flips", "on", 1.0) == pytest.approx(
        0.5 + (1 - math.exp(-2)) / 4, abs=1e-6
    )
    assert fluidmc.steady_state_reward(two_state, "occ") == pytest.approx(0.5, abs=1e-9)


def test_boolean_signal(bike):
    sig = fluidmc.boolean_signal(bike, "P>=0.19 [ !at_d U[0,50] at_d ]", "a", 100.0)
    assert len(sig["crossings"]) == 1
    assert len(sig["truth"]) == 2


def test_simulation_is_seeded(two_state):
    a = fluidmc.simulate(two_state, N=10, t_max=1.0, runs=50, seed=3, grid=[0.0, 1.0], tag="on")
    b = fluidmc.simulate(two_state, N=10, t_max=1.0, runs=50, seed=3, grid=[0.0, 1.0], tag="on", threads=2)
    np.testing.assert_array_equal(a["mean"], b["mean"])
    assert a["runs"] == 50


def test_uniformization():
    q = np.array([[-2.0, 2.0], [1.0, -1.0]])
    p = fluidmc.uniformization(q, [1.0, 0.0], 0.7)
    assert p[0] == pytest.approx(1 / 3 + 2 / 3 * math.exp(-2.1), abs=1e-11)


def test_errors(two_state):
    with pytest.raises(fluidmc.UnknownIdentifier):
        fluidmc.check(two_state, "P=? [ X[0,1] nowhere ]", "on")
    with pytest.raises(fluidmc.ParseError):
        fluidmc.parse_model("model m\nstates a, b\ntransition t { rule a -> b; rate }\n")
    with pytest.raises(fluidmc.InputError):
        fluidmc.cumulative_reward(two_state, "flips", "on", -1.0)


def test_cli_roundtrip():
    code, out, err = fluidmc.run_cli(["fluid", str(MODELS / "two_state.fmc"), "--tmax", "1", "--grid", "0.5"])
    assert code == 0, err
    assert out.splitlines()[0] == "t,x_on,x_off"
    assert fluidmc.run_cli(["nonsense"])[0] == 2
