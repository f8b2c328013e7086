"""Finite-difference audit of the analytic gradients.

Runs entirely in float64: the analytic gradient of the summed batch loss is
compared against central differences at a random sample of coordinates.
"""

import numpy as np

from .encoder import EncoderParams, MaskedBatch, loss_and_grad, mlm_losses


def _total_loss(params: EncoderParams, batch: MaskedBatch) -> float:
    return float(mlm_losses(params, batch).sum())


def grad_check(
    params: EncoderParams,
    batch: MaskedBatch,
    eps: float = 1e-4,
    n_coords: int = 200,
    seed: int = 0,
    grad_fn=None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Samples n_coords coordinates uniformly over all parameters. grad_fn may
    override the analytic gradient source (used for fault-injection tests).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if n_coords < 1:
        raise ValueError("n_coords must be >= 1")
    p64 = params.astype(np.float64)
    if grad_fn is None:
        _, grads = loss_and_grad(p64, batch)
    else:
        grads = grad_fn(p64, batch)

    names = list(p64.tensors)
    sizes = np.array([p64.tensors[k].size for k in names])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    rng = np.random.default_rng(seed)
    flat_idx = rng.integers(0, offsets[-1], size=n_coords)

    max_err = 0.0
    for idx in flat_idx:
        k = int(np.searchsorted(offsets, idx, side="right")) - 1
        name = names[k]
        local = int(idx - offsets[k])
        tensor = p64.tensors[name]
        flat = tensor.reshape(-1)
        orig = flat[local]
        flat[local] = orig + eps
        f_plus = _total_loss(p64, batch)
        flat[local] = orig - eps
        f_minus = _total_loss(p64, batch)
        flat[local] = orig
        numeric = (f_plus - f_minus) / (2.0 * eps)
        analytic = float(grads[name].reshape(-1)[local])
        denom = max(abs(analytic), abs(numeric))
        if denom < 1e-10:
            err = abs(analytic - numeric)
        else:
            err = abs(analytic - numeric) / denom
        max_err = max(max_err, err)
    return max_err
