"""Finite-difference verification of the hand-written backward passes."""

from __future__ import annotations

import math

import numpy as np

from crowdledger.neural.layers import NeuralError, mse_loss


class NonFiniteLossError(NeuralError):
    pass


def gradient_check(model, inputs, target, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``model`` needs forward(inputs, training)/backward(dy)/params().  The
    check always runs in evaluation mode, so dropout layers are inert and the
    forward pass is a deterministic function of the parameters.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError(f"eps must be in [1e-7, 1e-3], got {eps}")
    params = model.params()
    for p in params:
        p.grad[...] = 0.0
    pred = model.forward(inputs, training=False)
    loss, dpred = mse_loss(pred, np.asarray(target, dtype=np.float64))
    if not math.isfinite(loss):
        raise NonFiniteLossError(f"loss is {loss}")
    model.backward(dpred)
    analytic = [p.grad.copy() for p in params]

    def eval_loss() -> float:
        out = model.forward(inputs, training=False)
        value, _ = mse_loss(out, np.asarray(target, dtype=np.float64))
        if not math.isfinite(value):
            raise NonFiniteLossError(f"loss is {value}")
        return value

    worst = 0.0
    for p, a in zip(params, analytic):
        flat_value = p.value.reshape(-1)
        flat_analytic = a.reshape(-1)
        for idx in range(flat_value.size):
            orig = flat_value[idx]
            flat_value[idx] = orig + eps
            plus = eval_loss()
            flat_value[idx] = orig - eps
            minus = eval_loss()
            flat_value[idx] = orig
            numeric = (plus - minus) / (2.0 * eps)
            denom = max(abs(flat_analytic[idx]), abs(numeric), 1e-8)
            worst = max(worst, abs(flat_analytic[idx] - numeric) / denom)
    for p in params:
        p.grad[...] = 0.0
    return worst
