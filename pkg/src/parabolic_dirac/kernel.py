"""Closed-form fundamental solutions.

``heat_kernel``   H(t) (4 pi t)^(-m/2) exp(-|x|^2 / 4t)
``e_minus``       i H(t) (4 pi i t)^(-m/2) exp(i |x|^2 / 4t)
``E_minus``       G (-x/2t + f (|x|^2/4t^2 - i m/2t) + f+),
                  G = H(t) (4 pi i t)^(-m/2) exp(i |x|^2 / 4t)

The half-integer power takes the principal branch,
``(4 pi i t)^(m/2) = (4 pi t)^(m/2) exp(i pi m / 4)`` for t > 0, and
``H(0) = 0`` so every kernel vanishes for ``t <= 0``.

``E_minus`` is ``D_{x,-it}`` applied to ``e_minus`` in its own arguments,
so ``D_{x,-it} E_minus = 0`` away from the origin when the derivatives act
on ``(x, t)`` directly.
"""

from __future__ import annotations

import numpy as np

from .algebra import BladeIndex, Multivector, dimension, generators


def _split(x, t):
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    return x, t, r2


def heat_kernel(x, t, m: int):
    """Heat kernel; ``x`` has trailing axis of length ``m``."""
    x, t, r2 = _split(x, t)
    pos = t > 0
    ts = np.where(pos, t, 1.0)
    val = np.exp(-r2 / (4 * ts)) / (4 * np.pi * ts) ** (m / 2)
    out = np.where(pos, val, 0.0)
    return float(out) if out.ndim == 0 else out


def schrodinger_amplitude(x, t, m: int):
    """``G = H(t) (4 pi i t)^(-m/2) exp(i|x|^2/4t)`` (principal branch)."""
    x, t, r2 = _split(x, t)
    pos = t > 0
    ts = np.where(pos, t, 1.0)
    val = np.exp(1j * (r2 / (4 * ts) - np.pi * m / 4)) / (4 * np.pi * ts) ** (m / 2)
    out = np.where(pos, val, 0.0)
    return complex(out) if out.ndim == 0 else out


def e_minus(x, t, m: int):
    """Fundamental solution of ``-Delta - i d_t``."""
    return 1j * schrodinger_amplitude(x, t, m)


def E_minus_components(x, t, m: int) -> np.ndarray:
    """Coefficients of ``E_minus`` on the blades ``e_1..e_m, f, f+``.

    Returns an array of shape ``(m + 2,) + broadcast(x[..., 0], t).shape``.
    """
    x, t, r2 = _split(x, t)
    G = np.asarray(schrodinger_amplitude(x, t, m))
    ts = np.where(t > 0, t, 1.0)
    comps = [G * (-x[..., j] / (2 * ts)) for j in range(m)]
    comps.append(G * (r2 / (4 * ts ** 2) - 1j * m / (2 * ts)))
    comps.append(G * np.ones_like(r2))
    return np.stack(np.broadcast_arrays(*comps))


def kernel_blades(m: int) -> list[BladeIndex]:
    """Blades carried by ``E_minus``, in the order of :func:`E_minus_components`."""
    return ([BladeIndex((j,)) for j in range(1, m + 1)]
            + [BladeIndex(has_plain=True), BladeIndex(has_dagger=True)])


def E_minus(x, t, m: int) -> Multivector:
    """Fundamental solution of the backward parabolic Dirac operator at one point."""
    comps = E_minus_components(x, t, m)
    c = np.zeros(dimension(m), dtype=complex)
    for blade, val in zip(kernel_blades(m), comps):
        c[blade.index(m)] = complex(val)
    return Multivector(m, c)


def schrodinger_fd_residual(x, t: float, m: int, step: float) -> complex:
    """``(-Delta - i d_t) e_minus`` at one point by central differences of width ``step``."""
    x = np.asarray(x, dtype=float)
    e0 = e_minus(x, t, m)
    lap = 0.0
    for j in range(m):
        d = np.zeros(m)
        d[j] = step
        lap += (e_minus(x + d, t, m) - 2 * e0 + e_minus(x - d, t, m)) / step ** 2
    dt = (e_minus(x, t + step, m) - e_minus(x, t - step, m)) / (2 * step)
    return complex(-lap - 1j * dt)


def dirac_fd_residual(x, t: float, m: int, step: float) -> Multivector:
    """``D_{x,-it} E_minus`` at one point by central differences of width ``step``."""
    x = np.asarray(x, dtype=float)
    gens = generators(m)
    out = gens["f+"] * E_minus(x, t, m) * -1j
    for j in range(m):
        d = np.zeros(m)
        d[j] = step
        out = out + gens[f"e{j + 1}"] * ((E_minus(x + d, t, m) - E_minus(x - d, t, m)) * (1 / (2 * step)))
    dt = (E_minus(x, t + step, m) - E_minus(x, t - step, m)) * (1 / (2 * step))
    return out + gens["f"] * dt
