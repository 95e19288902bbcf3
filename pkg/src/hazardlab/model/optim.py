from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError, NumericError


@dataclass
class OptimizerState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    nesterov: bool = True
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def nadam_step(params: dict, grads: dict, state: OptimizerState):
    """One Nadam update; returns fresh ``(params, state)`` objects.

    First moment uses the Nesterov look-ahead
    ``b1 * m_t / (1 - b1^(t+1)) + (1 - b1) * g / (1 - b1^t)``;
    with ``nesterov=False`` this is plain Adam.
    """
    if set(grads) != set(params):
        raise InvalidInputError("gradient names do not match parameters")
    b1, b2 = state.beta1, state.beta2
    t = state.step + 1
    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != np.shape(p):
            raise InvalidInputError(f"gradient {name} has shape {g.shape}, expected {np.shape(p)}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name}")
        m = b1 * state.m.get(name, 0.0) + (1.0 - b1) * g
        v = b2 * state.v.get(name, 0.0) + (1.0 - b2) * g * g
        if state.nesterov:
            m_hat = b1 * m / (1.0 - b1 ** (t + 1)) + (1.0 - b1) * g / (1.0 - b1**t)
        else:
            m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        new_params[name] = np.asarray(p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon))
        new_m[name] = m
        new_v[name] = v
    new_state = OptimizerState(
        state.learning_rate, b1, b2, state.epsilon, state.nesterov, t, new_m, new_v
    )
    return new_params, new_state
