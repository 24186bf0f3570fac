from __future__ import annotations

import math

import numpy as np
import pytest

from equilib.cells import (
    CellState,
    ConvLstmCell,
    ConvLstmParams,
    FeedforwardHGruCell,
    HGruCell,
    HGruParams,
    LinearCell,
    ModelConfig,
    RecurrentModel,
    constant_gate,
    conv_lstm_step,
    facilitation,
    hgru_step,
    suppression,
    zero_state,
)
from equilib.errors import EquilibConfigError, ShapeMismatchError
from equilib.tensor import Variable, as_tensor


def _softplus(v: float) -> float:
    return math.log1p(math.exp(v))


def _scalar_hgru(**overrides: float) -> HGruParams:
    values = {
        "u_s": 0.0,
        "u_f": 0.0,
        "w_s": 0.7,
        "w_f": 0.3,
        "alpha": 0.1,
        "mu": 0.0,
        "nu_f": 1.0,
        "omega": 0.1,
        "bn_s_scale": 1.0,
        "bn_s_bias": 0.2,
        "bn_f_scale": 1.0,
        "bn_f_bias": -0.1,
    }
    values.update(overrides)
    return HGruParams.from_arrays({k: np.full((1, 1, 1, 1), v) for k, v in values.items()})


def test_hgru_single_pixel_matches_hand_computation() -> None:
    params = _scalar_hgru()
    z = Variable(np.full((1, 1, 1, 1), 0.5))
    h = Variable(np.ones((1, 1, 1, 1)))
    out = hgru_step(z, CellState(h=h), params).h.item()

    # One pixel: batch norm leaves only its bias.
    s = _softplus(0.5 - _softplus(0.1 * 0.2))
    c_f = -0.1
    h_tilde = _softplus(c_f + s + 0.1 * c_f * s)
    assert out == pytest.approx(0.5 * 1.0 + 0.5 * h_tilde, rel=1e-12)


def test_hgru_gate_override_interpolates(rng: np.random.Generator) -> None:
    params = HGruParams.initialize(rng, 2, 3)
    z = as_tensor(rng.uniform(0.0, 1.0, (1, 5, 5, 2)))
    h = as_tensor(rng.uniform(0.0, 1.0, (1, 5, 5, 2)))

    closed = hgru_step(z, CellState(h=h), params, gate_override=constant_gate(0.0)).h
    np.testing.assert_array_equal(closed.value, h.value)

    opened = hgru_step(z, CellState(h=h), params, gate_override=constant_gate(1.0)).h
    half = hgru_step(z, CellState(h=h), params, gate_override=constant_gate(0.5)).h
    np.testing.assert_allclose(half.value, 0.5 * (h.value + opened.value), atol=1e-12)
    assert np.all(opened.value >= 0.0)


def test_hgru_rejects_mismatched_channels(rng: np.random.Generator) -> None:
    params = HGruParams.initialize(rng, 2, 3)
    with pytest.raises(ShapeMismatchError, match="drive z"):
        hgru_step(as_tensor(np.ones((1, 3, 3, 3))), CellState(h=as_tensor(np.ones((1, 3, 3, 2)))), params)


def _lstm(channels: int, *, input_bias: float, forget_bias: float, output_bias: float) -> ConvLstmParams:
    arrays = {
        f"k_{gate}": np.zeros((3, 3, 2 * channels, channels))
        for gate in ("input", "forget", "output", "cell")
    }
    arrays.update(
        {
            "b_input": np.full((1, 1, 1, channels), input_bias),
            "b_forget": np.full((1, 1, 1, channels), forget_bias),
            "b_output": np.full((1, 1, 1, channels), output_bias),
            "b_cell": np.full((1, 1, 1, channels), 0.3),
        }
    )
    return ConvLstmParams.from_arrays(arrays)


def test_conv_lstm_saturated_gates(rng: np.random.Generator) -> None:
    x = as_tensor(rng.standard_normal((1, 4, 4, 2)))
    h = as_tensor(rng.standard_normal((1, 4, 4, 2)))
    c = as_tensor(rng.standard_normal((1, 4, 4, 2)))

    keep = conv_lstm_step(
        x, CellState(h=h, c=c), _lstm(2, input_bias=-50.0, forget_bias=50.0, output_bias=50.0)
    )
    np.testing.assert_array_equal(keep.c.value, c.value)
    np.testing.assert_allclose(keep.h.value, np.tanh(c.value), atol=1e-15)

    shut = conv_lstm_step(
        x, CellState(h=h, c=c), _lstm(2, input_bias=-50.0, forget_bias=50.0, output_bias=-50.0)
    )
    np.testing.assert_array_equal(shut.h.value, np.zeros((1, 4, 4, 2)))


def test_conv_lstm_cell_packs_memory(rng: np.random.Generator) -> None:
    cell = ConvLstmCell(ConvLstmParams.initialize(rng, 2, 3))
    assert cell.state_channels == 4
    x = as_tensor(rng.standard_normal((1, 4, 4, 2)))
    state = cell.step(x, zero_state(cell, x))
    assert state.shape == (1, 4, 4, 4)
    assert cell.hidden(state).shape == (1, 4, 4, 2)
    assert np.all(np.abs(cell.hidden(state).value) < 1.0)


def test_conv_lstm_needs_memory(rng: np.random.Generator) -> None:
    params = ConvLstmParams.initialize(rng, 2, 3)
    x = as_tensor(np.ones((1, 3, 3, 2)))
    with pytest.raises(ShapeMismatchError):
        conv_lstm_step(x, CellState(h=x), params)


def test_linear_cell_closed_form() -> None:
    cell = LinearCell.scalar(0.5)
    assert cell.fixed_point(np.array([1.0])) == pytest.approx([2.0])
    with pytest.raises(ShapeMismatchError):
        LinearCell(np.ones((2, 3)))


@pytest.mark.parametrize("cell_kind", ["hgru", "convlstm", "ffhgru"])
def test_model_round_trips_through_arrays(cell_kind: str, rng: np.random.Generator) -> None:
    config = ModelConfig(cell=cell_kind, channels=2, kernel_size=3, input_kernel_size=3)
    model = RecurrentModel.initialize(config, rng)
    clone = RecurrentModel.from_arrays(config, model.arrays())
    assert list(clone.parameters()) == list(model.parameters())
    assert all(name.split(".")[0] in {"input", "cell", "readout"} for name in model.parameters())

    image = as_tensor(rng.uniform(0.0, 1.0, (1, 6, 6, 1)))
    x = model.drive(image)
    state = model.cell.step(x, zero_state(model.cell, x))
    logits = model.readout(state)
    assert logits.shape == (1, 6, 6, 1)
    clone_x = clone.drive(image)
    np.testing.assert_allclose(
        clone.readout(clone.cell.step(clone_x, zero_state(clone.cell, clone_x))).value,
        logits.value,
    )


@pytest.mark.parametrize(
    "settings",
    [
        {"cell": "gru"},
        {"channels": 0},
        {"kernel_size": 4},
        {"input_kernel_size": -1},
        {"bn_eps": -1.0},
        {"depth": 0},
    ],
)
def test_model_config_validation(settings: dict[str, object]) -> None:
    with pytest.raises(EquilibConfigError):
        ModelConfig.from_settings(settings)


def _permuted_hgru(params: HGruParams, perm: np.ndarray) -> HGruParams:
    arrays = {}
    for name, variable in params.named().items():
        value = variable.value
        if name.startswith(("u_", "w_")):
            arrays[name] = value[:, :, perm][:, :, :, perm]
        else:
            arrays[name] = value[..., perm]
    return HGruParams.from_arrays(arrays)


def _permuted_lstm(params: ConvLstmParams, perm: np.ndarray) -> ConvLstmParams:
    both = np.concatenate([perm, perm + params.channels])
    arrays = {}
    for name, variable in params.named().items():
        value = variable.value
        if name.startswith("k_"):
            arrays[name] = value[:, :, both][:, :, :, perm]
        else:
            arrays[name] = value[..., perm]
    return ConvLstmParams.from_arrays(arrays)


def test_hgru_is_channel_equivariant(rng: np.random.Generator) -> None:
    params = HGruParams.initialize(rng, 3, 3)
    perm = np.array([2, 0, 1])
    z = rng.uniform(0.0, 1.0, (2, 5, 5, 3))
    h = rng.uniform(0.0, 1.0, (2, 5, 5, 3))

    out = hgru_step(as_tensor(z), CellState(h=as_tensor(h)), params).h
    shuffled = hgru_step(
        as_tensor(z[..., perm]), CellState(h=as_tensor(h[..., perm])), _permuted_hgru(params, perm)
    ).h
    np.testing.assert_allclose(shuffled.value, out.value[..., perm], rtol=1e-12, atol=1e-12)


def test_conv_lstm_is_channel_equivariant(rng: np.random.Generator) -> None:
    params = ConvLstmParams.initialize(rng, 3, 3)
    perm = np.array([1, 2, 0])
    x, h, c = (rng.standard_normal((1, 4, 4, 3)) for _ in range(3))

    out = conv_lstm_step(as_tensor(x), CellState(h=as_tensor(h), c=as_tensor(c)), params)
    shuffled = conv_lstm_step(
        as_tensor(x[..., perm]),
        CellState(h=as_tensor(h[..., perm]), c=as_tensor(c[..., perm])),
        _permuted_lstm(params, perm),
    )
    np.testing.assert_allclose(shuffled.h.value, out.h.value[..., perm], rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(shuffled.c.value, out.c.value[..., perm], rtol=1e-12, atol=1e-12)


def test_steps_are_bit_identical_on_repeat(rng: np.random.Generator) -> None:
    hgru = HGruParams.initialize(rng, 2, 3)
    lstm = ConvLstmParams.initialize(rng, 2, 3)
    z = as_tensor(rng.uniform(0.0, 1.0, (2, 6, 6, 2)))
    h = as_tensor(rng.uniform(0.0, 1.0, (2, 6, 6, 2)))
    c = as_tensor(rng.standard_normal((2, 6, 6, 2)))

    first = hgru_step(z, CellState(h=h), hgru).h.value
    second = hgru_step(z, CellState(h=h), hgru).h.value
    np.testing.assert_array_equal(first, second)

    once = conv_lstm_step(z, CellState(h=h, c=c), lstm)
    twice = conv_lstm_step(z, CellState(h=h, c=c), lstm)
    np.testing.assert_array_equal(once.h.value, twice.h.value)
    np.testing.assert_array_equal(once.c.value, twice.c.value)


@pytest.mark.parametrize("scale", [0.1, 1.0, 10.0])
def test_hgru_stages_are_non_negative(rng: np.random.Generator, scale: float) -> None:
    params = HGruParams.initialize(rng, 3, 3)
    z = as_tensor(scale * rng.standard_normal((2, 5, 5, 3)))
    h = as_tensor(scale * rng.standard_normal((2, 5, 5, 3)))
    s = suppression(z, h, params)
    assert np.all(s.value >= 0.0)
    assert np.all(facilitation(s, params).value >= 0.0)


def test_feedforward_stack_runs_unshared_layers(rng: np.random.Generator) -> None:
    cell = FeedforwardHGruCell.initialize(rng, 2, 3, depth=3)
    assert cell.depth == 3
    names = list(cell.parameters())
    assert names[0] == "layer0.u_s"
    assert {name.split(".")[0] for name in names} == {"layer0", "layer1", "layer2"}
    assert not np.array_equal(
        cell.parameters()["layer0.w_s"].value, cell.parameters()["layer1.w_s"].value
    )

    x = as_tensor(rng.uniform(0.0, 1.0, (1, 5, 5, 2)))
    h = zero_state(cell, x)
    expected = h
    for params in cell.layers:
        expected = hgru_step(x, CellState(h=expected), params).h
    np.testing.assert_array_equal(cell.step(x, h).value, expected.value)

    arrays = {name: variable.value for name, variable in cell.parameters().items()}
    clone = FeedforwardHGruCell.from_arrays(arrays)
    np.testing.assert_array_equal(clone.step(x, h).value, expected.value)
    with pytest.raises(ShapeMismatchError):
        FeedforwardHGruCell.from_arrays({**arrays, "w_s": arrays["layer0.w_s"]})
    with pytest.raises(ShapeMismatchError):
        FeedforwardHGruCell.from_arrays(
            {k: v for k, v in arrays.items() if not k.startswith("layer1.")}
        )
