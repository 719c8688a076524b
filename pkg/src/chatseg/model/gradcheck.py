"""Central-difference gradient checking for the attention/decoder math.

Float64 only; meant for small dimensions where an O(n) sweep per input is
cheap. Callers compare autograd gradients against these numeric ones.
"""

from __future__ import annotations

import torch


def central_difference_grads(fn, inputs: list[torch.Tensor], eps: float = 1e-6) -> list[torch.Tensor]:
    """Numeric gradient of a scalar-valued fn at each input entry."""
    grads = []
    with torch.no_grad():
        for x in inputs:
            grad = torch.zeros_like(x)
            flat, gflat = x.reshape(-1), grad.reshape(-1)
            for i in range(flat.numel()):
                original = flat[i].item()
                flat[i] = original + eps
                f_plus = float(fn(*inputs))
                flat[i] = original - eps
                f_minus = float(fn(*inputs))
                flat[i] = original
                gflat[i] = (f_plus - f_minus) / (2.0 * eps)
            grads.append(grad)
    return grads


def analytic_grads(fn, inputs: list[torch.Tensor]) -> list[torch.Tensor]:
    leaves = [x.detach().clone().requires_grad_(True) for x in inputs]
    value = fn(*leaves)
    value.backward()
    return [leaf.grad.detach().clone() for leaf in leaves]


def max_relative_error(analytic: list[torch.Tensor], numeric: list[torch.Tensor]) -> float:
    worst = 0.0
    for a, n in zip(analytic, numeric):
        scale = max(float(n.abs().max()), float(a.abs().max()), 1e-8)
        worst = max(worst, float((a - n).abs().max()) / scale)
    return worst


def check_gradients(fn, inputs: list[torch.Tensor], eps: float = 1e-6) -> float:
    """Return the worst relative disagreement between autograd and central
    differences for a scalar fn of float64 inputs."""
    for x in inputs:
        if x.dtype != torch.float64:
            raise ValueError("gradient checks must run in float64")
    numeric = central_difference_grads(fn, [x.detach().clone() for x in inputs], eps)
    analytic = analytic_grads(fn, inputs)
    return max_relative_error(analytic, numeric)
