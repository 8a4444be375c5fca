"""Physical constants (SI) and unit helpers.

Frequencies are angular (rad/s) everywhere inside the library, with hbar = 1 for
Hamiltonians. Cyclic values (GHz, MHz, kHz) are converted at the boundaries.
"""

import math

MU0 = 4e-7 * math.pi
MU_B = 9.2740100783e-24
G_E = 2.0028
HBAR = 1.054571817e-34
TWO_PI = 2.0 * math.pi

# angular frequency per tesla for an NV electron spin
GAMMA_NV = MU_B * G_E / HBAR


def ghz(f: float) -> float:
    return TWO_PI * f * 1e9


def mhz(f: float) -> float:
    return TWO_PI * f * 1e6


def khz(f: float) -> float:
    return TWO_PI * f * 1e3


def to_hz(omega: float) -> float:
    """Angular frequency (rad/s) to cyclic frequency (Hz)."""
    return omega / TWO_PI
