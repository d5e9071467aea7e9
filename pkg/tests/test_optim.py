import numpy as np
import pytest

from fmim.errors import NonFiniteGradientError
from fmim.optim import OptimConfig, init_state, step


def one(value):
    return {"W": np.array([float(value)])}


def test_init_state():
    params = {"W": np.ones((3, 2)), "b": np.ones(2)}
    state = init_state(params)
    assert state.t == 0
    for k in params:
        assert state.m[k].shape == params[k].shape
        assert not state.m[k].any() and not state.v[k].any()


def test_zero_gradient_no_decay():
    params = one(0.37)
    state = init_state(params)
    step(params, {"W": np.zeros(1)}, state, OptimConfig(weight_decay=0.0))
    assert params["W"][0] == 0.37
    assert state.t == 1


def test_first_step_closed_form():
    # m_hat = v_hat = 1, so the step is lr / (1 + eps)
    params = one(0.0)
    step(params, one(1.0), init_state(params), OptimConfig(lr=2e-5, weight_decay=0.0))
    assert params["W"][0] == pytest.approx(-2e-5 / (1 + 1e-8), rel=1e-12)


def test_pure_decoupled_decay():
    params = one(1.0)
    step(params, one(0.0), init_state(params), OptimConfig(lr=2e-5, weight_decay=0.1))
    assert params["W"][0] == pytest.approx(1 - 2e-6, abs=1e-15)


def test_biases_not_decayed():
    params = {"b1": np.array([1.0])}
    step(params, {"b1": np.zeros(1)}, init_state(params), OptimConfig(weight_decay=0.5))
    assert params["b1"][0] == 1.0


@pytest.mark.parametrize("g", [1e-6, 0.3, 42.0, -7.0])
def test_first_step_scale_invariant(g):
    params = one(0.0)
    step(params, one(g), init_state(params), OptimConfig(lr=1e-3, weight_decay=0.0))
    assert abs(params["W"][0]) == pytest.approx(1e-3 / (1 + 1e-8 / abs(g)), rel=1e-9)


def test_direction_follows_momentum():
    rng = np.random.default_rng(0)
    params = {"W": rng.normal(size=50)}
    state = init_state(params)
    cfg = OptimConfig(lr=1e-2, weight_decay=0.0)
    for _ in range(5):
        before = params["W"].copy()
        step(params, {"W": rng.normal(size=50)}, state, cfg)
        delta = params["W"] - before
        assert np.all(np.sign(delta) == -np.sign(state.m["W"]))


def test_non_finite_gradient_leaves_state_untouched():
    params = one(1.0)
    state = init_state(params)
    with pytest.raises(NonFiniteGradientError):
        step(params, one(float("nan")), state, OptimConfig())
    assert state.t == 0 and params["W"][0] == 1.0


def test_deterministic():
    def run():
        rng = np.random.default_rng(4)
        params = {"W": rng.normal(size=10)}
        state = init_state(params)
        for _ in range(10):
            step(params, {"W": rng.normal(size=10)}, state, OptimConfig(lr=1e-3))
        return params["W"]

    assert run().tobytes() == run().tobytes()


def test_config_validation():
    with pytest.raises(ValueError):
        OptimConfig(lr=0)
    with pytest.raises(ValueError):
        OptimConfig(beta1=1.0)
    with pytest.raises(ValueError):
        OptimConfig(weight_decay=-0.1)
