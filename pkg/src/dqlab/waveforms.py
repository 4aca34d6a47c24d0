"""Built-in signal and filter shapes."""

from __future__ import annotations

import numpy as np


def gaussian(t, t0=0.0, sigma=1.0, amplitude=1.0):
    t = np.asarray(t, dtype=float)
    return amplitude * np.exp(-0.5 * ((t - t0) / sigma) ** 2)


def sine_gaussian(t, t0=0.0, sigma=1.0, omega0=1.0, phase=0.0, amplitude=1.0):
    t = np.asarray(t, dtype=float)
    return gaussian(t, t0, sigma, amplitude) * np.cos(omega0 * (t - t0) + phase)


def raised_cosine(t, t0=0.0, duration=1.0, amplitude=1.0):
    """Hann-shaped pulse of total length ``duration`` centred on ``t0``."""
    t = np.asarray(t, dtype=float)
    x = (t - t0) / duration
    out = 0.5 * amplitude * (1.0 + np.cos(2 * np.pi * x))
    return np.where(np.abs(x) <= 0.5, out, 0.0)


WAVEFORMS = {
    "gaussian": (gaussian, ("t0", "sigma", "amplitude")),
    "sine_gaussian": (sine_gaussian, ("t0", "sigma", "omega0", "phase", "amplitude")),
    "raised_cosine": (raised_cosine, ("t0", "duration", "amplitude")),
}
