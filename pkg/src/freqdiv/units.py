"""Conversions between engineering units (GHz/2pi, MHz/2pi, ns) and SI angular units."""

import math

TWO_PI = 2.0 * math.pi


def ghz(value: float) -> float:
    """Frequency quoted as ``omega/2pi`` in GHz -> angular frequency in rad/s."""
    return value * 1e9 * TWO_PI


def mhz(value: float) -> float:
    """Rate or coupling quoted as ``x/2pi`` in MHz -> rad/s."""
    return value * 1e6 * TWO_PI


def ns(value: float) -> float:
    return value * 1e-9


def to_ghz(omega: float) -> float:
    return omega / TWO_PI / 1e9


def to_mhz(omega: float) -> float:
    return omega / TWO_PI / 1e6


def to_ns(t: float) -> float:
    return t * 1e9
