"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from ..errors import ContractError
from .graph import Node, backward, parameter

LossBuilder = Callable[[dict[str, Node]], Node]


def _evaluate(loss_builder: LossBuilder, arrays: Mapping[str, np.ndarray]) -> Node:
    nodes = {name: parameter(arr, name=name) for name, arr in arrays.items()}
    loss = loss_builder(nodes)
    if loss.value.shape != ():
        raise ContractError("finite_difference_check: loss builder must return a scalar")
    return loss


def finite_difference_check(loss_builder: LossBuilder,
                            params: Mapping[str, np.ndarray],
                            epsilon: float = 1e-5) -> float:
    """Compare analytic gradients against central differences.

    ``loss_builder`` must deterministically rebuild the same scalar loss
    from a dict of parameter nodes. Returns the maximum over all parameter
    entries of

        |analytic - central| / max(1e-8, |analytic| + |central|)

    with the central difference (f(p+eps) - f(p-eps)) / (2 eps).
    """
    if not epsilon > 0:
        raise ContractError(f"finite_difference_check: epsilon must be > 0, got {epsilon}")
    base = {name: np.array(arr, dtype=np.float64, copy=True)
            for name, arr in params.items()}

    loss = _evaluate(loss_builder, base)
    repeat = _evaluate(loss_builder, base)
    if loss.value.tobytes() != repeat.value.tobytes():
        raise ContractError(
            "finite_difference_check: loss builder is not deterministic "
            f"({float(loss.value)!r} vs {float(repeat.value)!r})")

    nodes = {name: parameter(arr, name=name) for name, arr in base.items()}
    analytic_loss = loss_builder(nodes)
    backward(analytic_loss)
    analytic = {name: nodes[name].grad if nodes[name].grad is not None
                else np.zeros_like(base[name])
                for name in base}

    worst = 0.0
    for name, arr in base.items():
        flat = arr.reshape(-1)
        grad_flat = analytic[name].reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + epsilon
            f_plus = float(_evaluate(loss_builder, base).value)
            flat[idx] = original - epsilon
            f_minus = float(_evaluate(loss_builder, base).value)
            flat[idx] = original
            central = (f_plus - f_minus) / (2.0 * epsilon)
            a = float(grad_flat[idx])
            rel = abs(a - central) / max(1e-8, abs(a) + abs(central))
            if rel > worst:
                worst = rel
    return worst
