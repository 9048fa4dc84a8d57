"""Smooth cutoffs, dyadic partitions, Schwartz profiles and their seminorms.

The radial cutoff is the exponential smooth step

    h(t) = exp(-1/t) for t > 0, else 0
    theta(tau) = h(1 - |tau|) / (h(1 - |tau|) + h(|tau| - 1/2))

which equals 1 on ``|tau| <= 1/2`` and vanishes for ``|tau| >= 1``.  The annular
bump is ``vartheta(tau) = theta(tau / 2) - theta(tau)``.

Derivatives are exact: ``h^{(n)}(t) = P_n(1/t) exp(-1/t)`` with
``P_{n+1}(s) = s^2 (P_n(s) - P_n'(s))``, and the quotient is differentiated with
the Leibniz rule applied to ``theta * S = A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

__all__ = [
    "theta",
    "vartheta",
    "CutoffProfile",
    "AnnularProfile",
    "make_theta",
    "make_vartheta",
    "PartitionReport",
    "partition_check",
    "SchwartzProfile",
    "ModulatedProfile",
    "SeminormResult",
    "SeminormConvergenceError",
    "gaussian_profile",
    "bump_profile",
    "annular_profile",
    "make_modulated",
    "schwartz_seminorm",
]

MAX_ORDER = 6
# exp(-s) * P_n(s) underflows to zero well before s reaches this value
_S_CUTOFF = 745.0


@lru_cache(maxsize=None)
def _h_poly(n: int) -> Polynomial:
    if n == 0:
        return Polynomial([1.0])
    p = _h_poly(n - 1)
    return Polynomial([0.0, 0.0, 1.0]) * (p - p.deriv())


def _h(t: np.ndarray, n: int) -> np.ndarray:
    """n-th derivative of ``exp(-1/t)`` (zero for ``t <= 0``)."""
    out = np.zeros_like(t, dtype=float)
    pos = t > 0
    s = np.where(pos, 1.0 / np.where(pos, t, 1.0), np.inf)
    ok = pos & (s < _S_CUTOFF)
    if np.any(ok):
        so = s[ok]
        out[ok] = _h_poly(n)(so) * np.exp(-so)
    return out


def _theta_derivs(a: np.ndarray, order: int) -> list[np.ndarray]:
    """``theta^{(j)}(a)`` for ``j = 0..order`` on ``1/2 < a < 1``."""
    A = [(-1) ** j * _h(1.0 - a, j) for j in range(order + 1)]
    B = [_h(a - 0.5, j) for j in range(order + 1)]
    S = [A[j] + B[j] for j in range(order + 1)]
    th = [A[0] / S[0]]
    for n in range(1, order + 1):
        acc = A[n].copy()
        for j in range(n):
            acc -= math.comb(n, j) * th[j] * S[n - j]
        th.append(acc / S[0])
    return th


def theta(tau: np.ndarray | float, deriv: int = 0) -> np.ndarray:
    """Radial cutoff ``theta`` or its derivative of order ``deriv <= 6``."""
    if not 0 <= deriv <= MAX_ORDER:
        raise ValueError(f"derivative order must lie in [0, {MAX_ORDER}]")
    t = np.asarray(tau, dtype=float)
    a = np.abs(t)
    out = np.zeros(t.shape)
    if deriv == 0:
        out[a <= 0.5] = 1.0
    mid = (a > 0.5) & (a < 1.0)
    if np.any(mid):
        val = _theta_derivs(a[mid], deriv)[deriv]
        if deriv % 2:
            val = np.where(t[mid] < 0, -val, val)
        out[mid] = val
    return out if out.ndim else out[()]


def vartheta(tau: np.ndarray | float, deriv: int = 0) -> np.ndarray:
    """Annular bump ``theta(tau / 2) - theta(tau)`` or its derivative."""
    t = np.asarray(tau, dtype=float)
    return 2.0 ** (-deriv) * theta(t / 2.0, deriv) - theta(t, deriv)


@dataclass(frozen=True)
class CutoffProfile:
    """Evaluator for ``theta`` and its derivatives up to order 6."""

    def __call__(self, tau: np.ndarray | float) -> np.ndarray:
        return theta(tau)

    def derivative(self, tau: np.ndarray | float, order: int) -> np.ndarray:
        return theta(tau, order)


@dataclass(frozen=True)
class AnnularProfile:
    """Evaluator for ``vartheta(tau) = theta(tau/2) - theta(tau)``."""

    base: CutoffProfile = field(default_factory=CutoffProfile)

    def __call__(self, tau: np.ndarray | float) -> np.ndarray:
        t = np.asarray(tau, dtype=float)
        return self.base(t / 2.0) - self.base(t)

    def derivative(self, tau: np.ndarray | float, order: int) -> np.ndarray:
        t = np.asarray(tau, dtype=float)
        return 2.0 ** (-order) * self.base.derivative(t / 2.0, order) - self.base.derivative(t, order)


def make_theta() -> CutoffProfile:
    return CutoffProfile()


def make_vartheta(base: CutoffProfile | None = None) -> AnnularProfile:
    return AnnularProfile(base if base is not None else CutoffProfile())


@dataclass(frozen=True)
class PartitionReport:
    """Outcome of :func:`partition_check`.

    Attributes
    ----------
    max_deviation : float
        ``sup |sum_k vartheta(2^-k tau) - 1|`` over samples in the valid range.
    valid_count : int
        Number of samples with ``2^k_min <= |tau| <= 2^k_max``.
    outside_tau, outside_sum : ndarray
        Samples outside the valid range and their partial sums.
    """

    max_deviation: float
    valid_count: int
    outside_tau: np.ndarray
    outside_sum: np.ndarray


def partition_check(
    vt: AnnularProfile | Callable[[np.ndarray], np.ndarray],
    k_min: int,
    k_max: int,
    taus: np.ndarray,
) -> PartitionReport:
    """Check ``sum_{k=k_min}^{k_max} vartheta(2^-k tau) = 1`` on ``2^k_min <= |tau| <= 2^k_max``."""
    if not k_min < k_max:
        raise ValueError("k_min must be smaller than k_max")
    t = np.asarray(taus, dtype=float).ravel()
    total = np.zeros_like(t)
    for k in range(k_min, k_max + 1):
        total += vt(t * 2.0 ** (-k))
    a = np.abs(t)
    valid = (a >= 2.0 ** k_min) & (a <= 2.0 ** k_max)
    dev = float(np.max(np.abs(total[valid] - 1.0))) if np.any(valid) else 0.0
    return PartitionReport(dev, int(valid.sum()), t[~valid], total[~valid])


# ---------------------------------------------------------------------------
# Schwartz profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SchwartzProfile:
    """A one-dimensional profile described by its spectrum.

    Parameters
    ----------
    spectrum : callable
        Vectorized ``xi -> phi_hat(xi)``.
    radius : float
        The spectrum vanishes (or is below 1e-16) for ``|xi| > radius``.
    annulus : (float, float) or None
        ``(lo, hi)`` when the spectrum vanishes outside ``lo <= |xi| <= hi``.
    name : str
    """

    spectrum: Callable[[np.ndarray], np.ndarray]
    radius: float
    annulus: tuple[float, float] | None = None
    name: str = "profile"

    def space(self, t: np.ndarray | float, deriv: int = 0, nodes: int | None = None) -> np.ndarray:
        """Space-side values ``d^deriv/dt^deriv phi(t)`` by trapezoidal quadrature.

        ``phi(t) = int phi_hat(xi) exp(2 pi i t xi) dxi`` over ``[-radius, radius]``.
        """
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        tmax = float(np.max(np.abs(flat))) if flat.size else 0.0
        r = self.radius
        if nodes is None:
            # trapezoid aliases at |t| = 1/dxi; keep a wide margin
            need = 2.0 * r * (2.0 * tmax + 64.0)
            nodes = int(2 ** math.ceil(math.log2(max(need, 2048.0))))
        xi = np.linspace(-r, r, nodes + 1)
        w = np.full(nodes + 1, 2.0 * r / nodes)
        w[[0, -1]] *= 0.5
        spec = np.asarray(self.spectrum(xi), dtype=np.complex128) * (2j * math.pi * xi) ** deriv * w
        out = np.empty(flat.shape, dtype=np.complex128)
        step = max(1, 2 ** 22 // (nodes + 1))
        for s in range(0, flat.size, step):
            out[s : s + step] = np.exp(2j * math.pi * np.outer(flat[s : s + step], xi)) @ spec
        return out.reshape(t.shape)


@dataclass(frozen=True)
class ModulatedProfile(SchwartzProfile):
    """Modulated cutoff ``phi^{(n)}`` (``i is None``) or ``psi^{(n, i)}``.

    Spectra are ``theta(2^{-a-4} tau) exp(i pi 2^{-a-4} n tau)`` and
    ``vartheta(2^{-i} tau) exp(i pi 2^{-a-4} n tau)`` respectively.
    """

    n: int = 0
    i: int | None = None
    a: int = 0


def gaussian_profile() -> SchwartzProfile:
    """``phi(t) = exp(-pi t^2)``, its own Fourier transform."""
    return SchwartzProfile(lambda xi: np.exp(-math.pi * np.asarray(xi, dtype=float) ** 2), 6.5, None, "gaussian")


def bump_profile(scale: float = 1.0) -> SchwartzProfile:
    """Profile with spectrum ``theta(xi / scale)``."""
    return SchwartzProfile(lambda xi: theta(np.asarray(xi, dtype=float) / scale), float(scale), None, f"theta/{scale:g}")


def annular_profile(scale: float = 1.0) -> SchwartzProfile:
    """Profile with spectrum ``vartheta(xi / scale)``, supported in ``[scale/2, 2 scale]``."""
    return SchwartzProfile(
        lambda xi: vartheta(np.asarray(xi, dtype=float) / scale),
        2.0 * scale,
        (0.5 * scale, 2.0 * scale),
        f"vartheta/{scale:g}",
    )


def make_modulated(n: int, i: int | None = None, a: int = 0) -> ModulatedProfile:
    """Modulated profile ``phi^{(n)}`` (``i`` omitted) or ``psi^{(n, i)}``.

    Parameters
    ----------
    n : int
        Modulation index.
    i : {-1, 0, 1}, optional
        Annulus index of the psi side.
    a : int
        Shift exponent, ``a >= 0``.
    """
    if int(n) != n or int(a) != a or a < 0:
        raise ValueError("n must be an integer and a a nonnegative integer")
    n, a = int(n), int(a)
    rate = math.pi * 2.0 ** (-a - 4) * n
    if i is None:
        scale = 2.0 ** (a + 4)

        def spec(xi: np.ndarray) -> np.ndarray:
            xi = np.asarray(xi, dtype=float)
            return theta(xi / scale) * np.exp(1j * rate * xi)

        return ModulatedProfile(spec, scale, None, f"phi^({n})", n=n, i=None, a=a)
    if i not in (-1, 0, 1):
        raise ValueError("annulus index must be -1, 0 or 1")
    sc = 2.0 ** i

    def spec_psi(xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return vartheta(xi / sc) * np.exp(1j * rate * xi)

    return ModulatedProfile(spec_psi, 2.0 * sc, (0.5 * sc, 2.0 * sc), f"psi^({n},{i})", n=n, i=i, a=a)


# ---------------------------------------------------------------------------
# Seminorms
# ---------------------------------------------------------------------------


class SeminormConvergenceError(RuntimeError):
    """The sampled window is too small to capture the supremum."""


@dataclass(frozen=True)
class SeminormResult:
    """Schwartz seminorm estimate with its sampling mesh.

    Attributes
    ----------
    value : float
        Estimated ``sup_t |t|^alpha |phi^{(beta)}(t)|``.
    argmax : float
        Location of the supremum.
    mesh_step, half_width : float
        Spacing and half-width of the sample window ``[-T, T)``.
    points : int
    tail_ratio : float
        Largest sampled value in the outer tenth of the window over ``value``.
    """

    value: float
    argmax: float
    mesh_step: float
    half_width: float
    points: int
    tail_ratio: float

    def __float__(self) -> float:
        return self.value


def schwartz_seminorm(
    profile: SchwartzProfile,
    alpha: int,
    beta: int,
    points: int = 2 ** 14,
    max_points: int = 2 ** 18,
) -> SeminormResult:
    """Estimate ``||phi||_{alpha, beta} = sup_t |t|^alpha |d_t^beta phi(t)|``.

    The derivative is sampled by an inverse FFT of ``(2 pi i xi)^beta phi_hat``
    over ``[-8R, 8R)`` where ``R`` is the spectral radius, so the spatial mesh is
    ``1/(16 R)``. The discrete maximum is refined by parabolic interpolation.
    The window doubles while the outer tenth carries more than 1% of the
    supremum.

    Raises
    ------
    SeminormConvergenceError
        If the tail criterion still fails at ``max_points`` samples.
    """
    if not (0 <= alpha <= 3 and 0 <= beta <= 3):
        raise ValueError("alpha and beta must lie in [0, 3]")
    F = 8.0 * profile.radius
    m = int(points)
    while True:
        dxi = 2.0 * F / m
        xi = np.fft.fftfreq(m, d=1.0 / (2.0 * F))
        dt = 1.0 / (2.0 * F)
        spec = np.asarray(profile.spectrum(xi), dtype=np.complex128) * (2j * math.pi * xi) ** beta
        vals = np.fft.ifft(spec) * (m * dxi)
        t = np.fft.fftfreq(m, d=1.0 / (m * dt))  # j * dt in FFT order
        g = np.abs(t) ** alpha * np.abs(vals)
        order = np.argsort(t)
        t, g = t[order], g[order]
        half = m * dt / 2.0
        j = int(np.argmax(g))
        sup, arg = float(g[j]), float(t[j])
        if 0 < j < m - 1:
            y0, y1, y2 = g[j - 1], g[j], g[j + 1]
            den = y0 - 2.0 * y1 + y2
            if den < 0:
                off = 0.5 * (y0 - y2) / den
                sup = float(y1 - 0.25 * (y0 - y2) * off)
                arg = float(t[j] + off * dt)
        tail = float(g[np.abs(t) >= 0.9 * half].max()) / sup if sup > 0 else 0.0
        if tail <= 0.01:
            return SeminormResult(sup, arg, dt, half, m, tail)
        if m >= max_points:
            raise SeminormConvergenceError(
                f"seminorm tail {tail:.3g} of sup persists at {m} samples (window {half:g})"
            )
        m *= 2
