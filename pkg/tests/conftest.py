"""Shared fixtures and brute-force oracles.

The oracles below avoid ``numpy.fft`` and the package's regrouped evaluation
paths: transforms are explicit DFT matrices and operators are full frequency sums.
"""

from __future__ import annotations

import numpy as np
import pytest

from twistpar.grid import GridFunction2D, GridGeometry


def dft_matrix(geo: GridGeometry) -> np.ndarray:
    """``E[j, m] = exp(-2 pi i x_j xi_m)`` with frequencies in FFT order."""
    x = np.arange(geo.n) * geo.l / geo.n
    xi = np.array([(m if m < geo.n // 2 else m - geo.n) / geo.l for m in range(geo.n)])
    return np.exp(-2j * np.pi * np.outer(x, xi))


def brute_spectrum(f: GridFunction2D) -> np.ndarray:
    """Two-dimensional Riemann-sum transform by direct summation."""
    geo = f.geometry
    E = dft_matrix(geo)
    return (geo.l / geo.n) ** 2 * E.T @ f.values @ E


def nyquist_mask(geo: GridGeometry) -> np.ndarray:
    keep = np.ones(geo.n)
    keep[geo.n // 2] = 0.0
    return keep


def brute_twisted(m, f: GridFunction2D, g: GridFunction2D) -> np.ndarray:
    """Direct quadruple frequency sum for ``T_m``; Nyquist rows of ``m`` are zeroed."""
    geo = f.geometry
    F, G = brute_spectrum(f), brute_spectrum(g)
    xi = geo.freqs
    M = np.asarray(m(xi[:, None], xi[None, :]), dtype=complex) * np.outer(nyquist_mask(geo), nyquist_mask(geo))
    Ei = np.conj(dft_matrix(geo))
    out = np.einsum("ad,ab,cd,xa,yb,xc,yd->xy", M, F, G, Ei, Ei, Ei, Ei, optimize=False)
    return out / geo.l ** 4


def brute_spatial(sigma, f: GridFunction2D, g: GridFunction2D) -> np.ndarray:
    """Direct quadruple frequency sum for ``T_sigma``."""
    geo = f.geometry
    F, G = brute_spectrum(f), brute_spectrum(g)
    x, y = geo.mesh()
    xi = geo.freqs
    S = np.asarray(
        sigma(x[:, :, None, None], y[:, :, None, None], xi[None, None, :, None], xi[None, None, None, :]),
        dtype=complex,
    )
    S = S * np.outer(nyquist_mask(geo), nyquist_mask(geo))[None, None]
    Ei = np.conj(dft_matrix(geo))
    out = np.einsum("xyad,ab,cd,xa,yb,xc,yd->xy", S, F, G, Ei, Ei, Ei, Ei, optimize="greedy")
    return out / geo.l ** 4


def random_function(geo: GridGeometry, rng: np.random.Generator) -> GridFunction2D:
    vals = rng.standard_normal((geo.n, geo.n)) + 1j * rng.standard_normal((geo.n, geo.n))
    return GridFunction2D(geo, vals)


def mode(geo: GridGeometry, a: float, b: float) -> GridFunction2D:
    return GridFunction2D.from_function(geo, lambda x, y: np.exp(2j * np.pi * (a * x + b * y)))


def rel_l2(u: np.ndarray, v: np.ndarray) -> float:
    den = np.linalg.norm(v)
    return float(np.linalg.norm(u - v) / den) if den > 0 else float(np.linalg.norm(u))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
