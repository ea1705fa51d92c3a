"""Elman recurrent controller with a flat, portable weight layout."""

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Tuple

import numpy as np

from src.bodyplan import BodyPlan
from src.errors import InterfaceError

HIDDEN = 6
CONTEXT = 6


@dataclass(frozen=True)
class ElmanSpec:
    n_in: int
    n_out: int
    n_hidden: int = HIDDEN
    n_context: int = CONTEXT

    def __post_init__(self):
        if self.n_in < 1 or self.n_out < 1:
            raise InterfaceError("an Elman controller needs at least one input and one output")
        if self.n_hidden != HIDDEN or self.n_context != CONTEXT:
            raise InterfaceError("hidden and context layers are fixed at 6 neurons")


class ElmanWeights(NamedTuple):
    input_hidden: np.ndarray
    context_hidden: np.ndarray
    hidden_bias: np.ndarray
    hidden_output: np.ndarray
    output_bias: np.ndarray


def weights_dim(spec: ElmanSpec) -> int:
    """input->hidden, context->hidden, hidden bias, hidden->output, output bias."""
    return (
        spec.n_in * HIDDEN + CONTEXT * HIDDEN + HIDDEN + HIDDEN * spec.n_out + spec.n_out
    )


def spec_for_plan(plan: BodyPlan) -> ElmanSpec:
    """One input per sensor, one output per wheel or leg."""
    return ElmanSpec(n_in=len(plan.sensors), n_out=len(plan.actuators))


def unpack_weights(spec: ElmanSpec, weights: np.ndarray) -> ElmanWeights:
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (weights_dim(spec),):
        raise InterfaceError(
            f"expected {weights_dim(spec)} weights for {spec}, got {weights.shape}"
        )
    sizes = (spec.n_in * HIDDEN, CONTEXT * HIDDEN, HIDDEN, HIDDEN * spec.n_out, spec.n_out)
    blocks = np.split(weights, np.cumsum(sizes)[:-1])
    return ElmanWeights(
        input_hidden=blocks[0].reshape(HIDDEN, spec.n_in),
        context_hidden=blocks[1].reshape(HIDDEN, CONTEXT),
        hidden_bias=blocks[2],
        hidden_output=blocks[3].reshape(spec.n_out, HIDDEN),
        output_bias=blocks[4],
    )


@dataclass(frozen=True, eq=False)
class ControllerState:
    spec: ElmanSpec
    weights: np.ndarray
    context: np.ndarray = field(default_factory=lambda: np.zeros(CONTEXT))
    layers: Optional[ElmanWeights] = field(default=None, repr=False)

    def __post_init__(self):
        # Unpacked once per episode; replace() carries the layers forward.
        if self.layers is None:
            object.__setattr__(self, "layers", unpack_weights(self.spec, self.weights))


def step(state: ControllerState, inputs: np.ndarray) -> Tuple[np.ndarray, ControllerState]:
    """One Elman update; the new context is this step's hidden activation."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.shape != (state.spec.n_in,):
        raise InterfaceError(f"expected {state.spec.n_in} inputs, got {inputs.shape}")
    w = state.layers
    hidden = np.tanh(w.input_hidden @ inputs + w.context_hidden @ state.context + w.hidden_bias)
    outputs = np.tanh(w.hidden_output @ hidden + w.output_bias)
    return outputs, replace(state, context=hidden)
