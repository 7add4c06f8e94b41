import numpy as np
import pytest

from srlp.errors import TrainingDiverged
from srlp.nn.adam import AdamState, adam_step


def test_zero_gradients_leave_params_unchanged():
    params = {"w": np.array([1.0, -2.0, 3.0])}
    before = params["w"].copy()
    adam_step(params, {"w": np.zeros(3)}, AdamState(), lr=0.1)
    np.testing.assert_array_equal(params["w"], before)


def test_single_step_matches_hand_computed_adam():
    # g=1, fresh moments: m_hat = v_hat = 1, so the step is lr/(1 + eps)
    params = {"p": np.array([0.5])}
    adam_step(params, {"p": np.array([1.0])}, AdamState(), lr=0.1)
    expected = 0.5 - 0.1 * 1.0 / (1.0 + 1e-8)
    np.testing.assert_allclose(params["p"], [expected], atol=1e-15)
    assert params["p"][0] == pytest.approx(0.4, abs=1e-8)


def test_two_steps_hand_computed():
    params = {"p": np.array([0.0])}
    state = AdamState()
    g = np.array([2.0])
    adam_step(params, {"p": g}, state, lr=0.01)
    adam_step(params, {"p": g}, state, lr=0.01)
    # constant gradient: m_hat = g, v_hat = g^2 at every step
    expected = -0.01 * 2.0 / (2.0 + 1e-8) * 2
    np.testing.assert_allclose(params["p"], [expected], rtol=1e-9)


def test_decoupled_weight_decay():
    params = {"p": np.array([1.0])}
    adam_step(params, {"p": np.zeros(1)}, AdamState(), lr=0.1, weight_decay=0.01)
    np.testing.assert_allclose(params["p"], [1.0 - 0.1 * 0.01 * 1.0])


def test_determinism_across_runs():
    def run():
        rng = np.random.default_rng(3)
        params = {"a": rng.normal(size=(4, 4)), "b": rng.normal(size=4)}
        state = AdamState()
        for _ in range(10):
            grads = {k: rng.normal(size=v.shape) for k, v in params.items()}
            adam_step(params, grads, state, lr=1e-3)
        return params

    a, b = run(), run()
    for key in a:
        np.testing.assert_array_equal(a[key], b[key])


def test_non_finite_gradient_names_tensor():
    params = {"fine": np.zeros(2), "broken": np.zeros(2)}
    grads = {"fine": np.zeros(2), "broken": np.array([1.0, np.nan])}
    with pytest.raises(TrainingDiverged, match="broken"):
        adam_step(params, grads, AdamState(), lr=0.1)
