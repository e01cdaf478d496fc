"""Smooth compactly supported profiles built from the exp(-1/t) transition.

Every profile is radial: it is evaluated on a nonnegative radius (or on the
absolute value of a real argument). Only supports and plateau values are
prescribed; the transition shape is the standard C-infinity smooth step.
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=np.float64)
    a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class BumpProfile:
    kind: str
    func: Callable
    support: tuple
    dimension: int = 0

    def __call__(self, t):
        return self.func(np.abs(np.asarray(t, dtype=np.float64)))


def _cutoff(r):
    # 1 on [0, 1], 0 on [2, inf)
    return smooth_step(2.0 - r)


def phi_annulus():
    """Dyadic annulus bump: supported in [1/2, 2], dilates sum to one on (0, inf)."""
    return BumpProfile("phi_annulus", lambda r: _cutoff(r) - _cutoff(2.0 * r), (0.5, 2.0))


def zeta_cap():
    """1 on [0, 1/2], 0 beyond 1."""
    return BumpProfile("zeta_cap", lambda u: smooth_step(2.0 * (1.0 - u)), (0.0, 1.0))


def Phi_plateau():
    """Values in [0, 1]; 1 on [0, 2], 0 beyond 4."""
    return BumpProfile("Phi_plateau", lambda x: smooth_step((4.0 - x) / 2.0), (0.0, 4.0))


def psi_lowpass():
    """1 on [0, 1], 0 on [2, inf)."""
    return BumpProfile("psi_lowpass", _cutoff, (0.0, 2.0))


def _eta_shape(r):
    r = np.asarray(r, dtype=np.float64)
    inside = r < 1.0
    q = np.where(inside, 1.0 - r * r, 1.0)
    return np.where(inside, np.exp(-1.0 / q), 0.0)


def eta_mollifier(d):
    """Nonnegative radial bump on the unit ball of R^d with unit mass."""
    if d < 1:
        raise ValueError("dimension must be positive")
    radial, _ = integrate.quad(lambda r: float(_eta_shape(r)) * r ** (d - 1), 0.0, 1.0,
                               epsabs=0.0, epsrel=1e-13, limit=200)
    sphere_area = 2.0 * np.pi ** (d / 2.0) / special.gamma(d / 2.0)
    c = 1.0 / (sphere_area * radial)
    return BumpProfile("eta_mollifier", lambda r: c * _eta_shape(r), (0.0, 1.0), dimension=d)


PROFILES = {
    "phi_annulus": phi_annulus,
    "zeta_cap": zeta_cap,
    "Phi_plateau": Phi_plateau,
    "psi_lowpass": psi_lowpass,
}
