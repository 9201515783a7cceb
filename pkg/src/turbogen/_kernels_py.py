"""Pure-numpy statevector kernels.

Same in-place contract as the compiled ``_ckernels`` module; selected by
:mod:`turbogen.kernels` when the extension is unavailable.
"""
from __future__ import annotations

import numpy as np


def apply_1q(state: np.ndarray, bit: int, u: np.ndarray) -> None:
    view = state.reshape(-1, 2, 1 << bit)
    a = view[:, 0, :].copy()
    b = view[:, 1, :]
    view[:, 0, :] = u[0, 0] * a + u[0, 1] * b
    view[:, 1, :] *= u[1, 1]
    view[:, 1, :] += u[1, 0] * a


def apply_cx(state: np.ndarray, control_bit: int, target_bit: int) -> None:
    hi, lo = max(control_bit, target_bit), min(control_bit, target_bit)
    view = state.reshape(-1, 2, 1 << (hi - lo - 1), 2, 1 << lo)
    # axis 1 holds the higher bit, axis 3 the lower one
    if control_bit > target_bit:
        sub = view[:, 1]
        tmp = sub[:, :, 0, :].copy()
        sub[:, :, 0, :] = sub[:, :, 1, :]
        sub[:, :, 1, :] = tmp
    else:
        sub = view[:, :, :, 1, :]
        tmp = sub[:, 0].copy()
        sub[:, 0] = sub[:, 1]
        sub[:, 1] = tmp


def norm_squared(state: np.ndarray) -> float:
    return float(np.sum(state.real * state.real + state.imag * state.imag))
