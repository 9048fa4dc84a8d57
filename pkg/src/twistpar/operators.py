"""Twisted paraproducts, twisted bilinear multipliers and spatially varying multipliers.

For grid functions ``f, g`` and a symbol ``m(tau_1, tau_2)`` the twisted
multiplier is

    T_m(f, g)(x, y) = sum_{xi, eta} m(xi_1, eta_2) f_hat(xi) g_hat(eta)
                      exp(2 pi i ((xi_1 + eta_1) x + (xi_2 + eta_2) y)) / L^4

Only ``xi_1`` and ``eta_2`` enter the symbol, so the sum regroups into a
transform of ``f`` along ``x`` and of ``g`` along ``y``.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np

from .cutoffs import SchwartzProfile, annular_profile, theta, vartheta
from .grid import GridFunction2D, GridGeometry, SupportViolationError

__all__ = [
    "NyquistWarning",
    "SeparableTerm",
    "TwistedSymbol",
    "SpatialSymbol",
    "ParaproductSpec",
    "cone",
    "cone_symbol",
    "hard_cone_symbol",
    "constant_symbol",
    "zero_symbol",
    "paraproduct_symbol",
    "modulated_spatial_symbol",
    "default_scale_range",
    "partial_convolution",
    "littlewood_paley",
    "apply_paraproduct",
    "apply_twisted_multiplier",
    "apply_spatial_multiplier",
    "apply_symbol",
]

# elements per temporary block in the chunked evaluations
_BLOCK = 2 ** 21


class NyquistWarning(UserWarning):
    """A rescaled profile reaches beyond the grid's Nyquist margin.

    Attributes
    ----------
    clipped_mass : float
        Fraction of ``int |phi_hat(2^-k xi)|^2`` lying beyond the Nyquist frequency.
    """

    def __init__(self, message: str, clipped_mass: float) -> None:
        super().__init__(message)
        self.clipped_mass = clipped_mass


# ---------------------------------------------------------------------------
# Symbols
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeparableTerm:
    """One product ``coef * fx(tau_1) * fy(tau_2)`` of a separable symbol."""

    coef: complex
    fx: Callable[[np.ndarray], np.ndarray]
    fy: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class TwistedSymbol:
    """Symbol ``m(tau_1, tau_2)`` of a twisted multiplier.

    Parameters
    ----------
    func : callable
        Vectorized evaluator ``(tau_1, tau_2) -> m``.
    support_constant : float or None
        ``c`` such that ``m = 0`` when ``|tau_1| > c |tau_2|``; ``None`` means
        unrestricted.
    homogeneous : bool
        Whether ``m`` is invariant under the dyadic dilations ``tau -> 2 tau``.
        The value at the origin is then ``origin_value``.
    origin_value : complex
    bounds : mapping, optional
        Derivative bound constants ``C_{beta_1, beta_2}``, metadata only.
    separable : callable, optional
        ``geometry -> list[SeparableTerm]`` whose sum equals ``m`` at every grid
        frequency pair; enables the fast path in :func:`apply_symbol`.
    name : str
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    support_constant: float | None = None
    homogeneous: bool = False
    origin_value: complex = 0.0
    bounds: Mapping[tuple[int, int], float] | None = None
    separable: Callable[[GridGeometry], list[SeparableTerm]] | None = None
    name: str = "m"
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.support_constant is not None and not self.support_constant >= 0:
            raise ValueError("support constant must be nonnegative")

    def __call__(self, t1: np.ndarray | float, t2: np.ndarray | float) -> np.ndarray:
        t1, t2 = np.broadcast_arrays(np.asarray(t1, dtype=float), np.asarray(t2, dtype=float))
        vals = np.array(self.func(t1, t2), dtype=np.complex128)
        vals = np.broadcast_to(vals, t1.shape).copy()
        if self.homogeneous:
            vals[(t1 == 0) & (t2 == 0)] = self.origin_value
        return vals if vals.ndim else vals[()]

    def on_grid(self, geo: GridGeometry) -> np.ndarray:
        """Values ``m(xi_1, eta_2)`` at grid frequencies with Nyquist rows and columns zeroed."""
        key = (geo.n, geo.l)
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        t1, t2 = geo.freq_mesh()
        vals = self(t1, t2) * geo.keep[:, None] * geo.keep[None, :]
        vals.flags.writeable = False
        with self._lock:
            return self._cache.setdefault(key, vals)

    def check_support(self, samples: int = 4096, seed: int = 0, radius: float = 64.0) -> None:
        """Raise :class:`SupportViolationError` if ``m`` is nonzero outside its cone."""
        c = self.support_constant
        if c is None:
            return
        rng = np.random.default_rng(seed)
        t2 = rng.uniform(-radius, radius, samples) * 2.0 ** rng.uniform(-8, 0, samples)
        excess = 2.0 ** rng.uniform(-20, 4, samples)
        t1 = np.sign(rng.uniform(-1, 1, samples)) * (c * np.abs(t2) * (1.0 + excess))
        t1 = np.concatenate([t1, rng.uniform(-radius, radius, 64)])
        t2 = np.concatenate([t2, np.zeros(64)])
        bad = np.abs(self(t1, t2)) > 0
        if np.any(bad):
            j = int(np.argmax(bad))
            raise SupportViolationError(
                f"symbol {self.name} is nonzero at ({t1[j]:.6g}, {t2[j]:.6g}) outside |tau_1| <= {c:g}|tau_2|"
            )


def cone(t1: np.ndarray, t2: np.ndarray, c: float = 1.0) -> np.ndarray:
    """Smooth cone symbol ``sum_k theta(2^{1-k} tau_1 / c) vartheta(2^{-k} tau_2)``.

    Supported in ``|tau_1| < c |tau_2|``, equal to 1 on ``|tau_1| <= c |tau_2| / 8``
    and invariant under ``tau -> 2 tau``. Only the two or three scales ``k`` with
    ``vartheta(2^{-k} tau_2) != 0`` are summed.
    """
    t1, t2 = np.broadcast_arrays(np.asarray(t1, dtype=float), np.asarray(t2, dtype=float))
    a2 = np.abs(t2)
    nz = a2 > 0
    k0 = np.zeros(t2.shape)
    k0[nz] = np.floor(np.log2(a2[nz]))
    out = np.zeros(t2.shape)
    for d in (-1.0, 0.0, 1.0, 2.0):
        k = k0 + d
        term = theta(np.ldexp(t1, (1 - k).astype(int)) / c) * vartheta(np.ldexp(t2, (-k).astype(int)))
        out += np.where(nz, term, 0.0)
    return out


def _cone_terms(c: float) -> Callable[[GridGeometry], list[SeparableTerm]]:
    def terms(geo: GridGeometry) -> list[SeparableTerm]:
        k_lo = math.floor(math.log2(1.0 / geo.l)) - 1
        k_hi = math.ceil(math.log2(geo.nyquist)) + 1
        out = []
        for k in range(k_lo, k_hi + 1):
            out.append(
                SeparableTerm(
                    1.0,
                    lambda t, k=k: theta(np.ldexp(np.asarray(t, dtype=float), 1 - k) / c),
                    lambda t, k=k: vartheta(np.ldexp(np.asarray(t, dtype=float), -k)),
                )
            )
        return out

    return terms


def cone_symbol(c: float = 1.0) -> TwistedSymbol:
    """Smooth homogeneous cone symbol with support constant ``c``; see :func:`cone`."""
    if not c > 0:
        raise ValueError("cone aperture must be positive")
    return TwistedSymbol(
        lambda t1, t2: cone(t1, t2, c),
        support_constant=float(c),
        homogeneous=True,
        separable=_cone_terms(float(c)),
        name=f"cone({c:g})",
    )


def hard_cone_symbol(c: float = 1.0) -> TwistedSymbol:
    """Indicator of ``|tau_1| <= c |tau_2| / 2``; a discontinuous counterexample."""
    return TwistedSymbol(
        lambda t1, t2: ((np.abs(t1) <= 0.5 * c * np.abs(t2)) & (t2 != 0)).astype(float),
        support_constant=float(c),
        homogeneous=True,
        name=f"hard_cone({c:g})",
    )


def constant_symbol(value: complex = 1.0) -> TwistedSymbol:
    """``m = value`` everywhere (support unrestricted)."""
    value = complex(value)
    return TwistedSymbol(
        lambda t1, t2: np.full(np.shape(t1), value),
        support_constant=0.0 if value == 0 else None,
        separable=lambda geo: [SeparableTerm(value, lambda t: np.ones(np.shape(t)), lambda t: np.ones(np.shape(t)))],
        name=f"const({value:g})",
    )


def zero_symbol() -> TwistedSymbol:
    return constant_symbol(0.0)


def paraproduct_symbol(spec: "ParaproductSpec") -> TwistedSymbol:
    """Symbol ``sum_k lambda_k phi_hat(2^-k tau_1) psi_hat(2^-k tau_2)`` of a paraproduct."""

    def func(t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
        out = np.zeros(np.shape(t1), dtype=np.complex128)
        for k, lam in spec.lambdas.items():
            out += lam * spec.phi.spectrum(np.ldexp(t1, -k)) * spec.psi.spectrum(np.ldexp(t2, -k))
        return out

    return TwistedSymbol(func, name="paraproduct")


@dataclass(frozen=True, eq=False)
class SpatialSymbol:
    """Symbol ``sigma(x, y, tau_1, tau_2)`` depending on the output point.

    Parameters
    ----------
    func : callable
        Vectorized ``(x, y, tau_1, tau_2) -> sigma``.
    support_constant : float or None
        Common support constant of every ``sigma(x, y, ., .)``.
    factors : (callable, TwistedSymbol), optional
        ``(amplitude, m)`` when ``sigma = amplitude(x, y) m(tau)``; only used to
        tabulate ``sigma`` cheaply, never to shortcut the quadruple sum.
    """

    func: Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    support_constant: float | None = None
    factors: tuple[Callable[[np.ndarray, np.ndarray], np.ndarray], TwistedSymbol] | None = None
    name: str = "sigma"

    @classmethod
    def from_twisted(cls, m: TwistedSymbol) -> "SpatialSymbol":
        one = lambda x, y: np.ones(np.broadcast(x, y).shape)  # noqa: E731
        return cls(lambda x, y, t1, t2: m(t1, t2), m.support_constant, (one, m), m.name)

    def tabulate(self, geo: GridGeometry, rows: np.ndarray) -> np.ndarray:
        """``sigma`` on ``(x_rows, y, xi_1, eta_2)`` with Nyquist frequencies zeroed."""
        x = geo.points[rows]
        y = geo.points
        fr = geo.freqs
        if self.factors is not None:
            amp, m = self.factors
            a = np.asarray(amp(x[:, None], y[None, :]), dtype=np.complex128)
            a = np.broadcast_to(a, (len(rows), geo.n))
            return a[:, :, None, None] * m.on_grid(geo)[None, None, :, :]
        vals = np.asarray(
            self.func(x[:, None, None, None], y[None, :, None, None], fr[None, None, :, None], fr[None, None, None, :]),
            dtype=np.complex128,
        )
        vals = np.broadcast_to(vals, (len(rows), geo.n, geo.n, geo.n))
        return vals * geo.keep[None, None, :, None] * geo.keep[None, None, None, :]

    def check_support(self, geo: GridGeometry, samples: int = 2048, seed: int = 0) -> None:
        c = self.support_constant
        if c is None:
            return
        rng = np.random.default_rng(seed)
        x = rng.uniform(0, geo.l, samples)
        y = rng.uniform(0, geo.l, samples)
        t2 = rng.uniform(-geo.nyquist, geo.nyquist, samples)
        t1 = np.sign(rng.uniform(-1, 1, samples)) * c * np.abs(t2) * (1.0 + 2.0 ** rng.uniform(-20, 3, samples))
        bad = np.abs(np.asarray(self.func(x, y, t1, t2))) > 0
        if np.any(bad):
            raise SupportViolationError(f"spatial symbol {self.name} is nonzero outside its cone")


def modulated_spatial_symbol(
    amplitude: Callable[[np.ndarray, np.ndarray], np.ndarray], m: TwistedSymbol, name: str = "sigma"
) -> SpatialSymbol:
    """``sigma(x, y, tau) = amplitude(x, y) m(tau)``."""
    return SpatialSymbol(
        lambda x, y, t1, t2: amplitude(x, y) * m(t1, t2),
        m.support_constant,
        (amplitude, m),
        name,
    )


# ---------------------------------------------------------------------------
# One-axis convolutions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ParaproductSpec:
    """Twisted paraproduct ``sum_k lambda_k P^{phi_k}_x f  P^{psi_k}_y g``.

    Parameters
    ----------
    phi : SchwartzProfile
    psi : SchwartzProfile
        Must have an annular spectrum (``psi.annulus`` set).
    lambdas : mapping int -> complex
        Scale coefficients over a finite range.
    """

    phi: SchwartzProfile
    psi: SchwartzProfile
    lambdas: Mapping[int, complex]

    def __post_init__(self) -> None:
        if self.psi.annulus is None or self.psi.annulus[0] <= 0:
            raise ValueError("psi must have a spectrum supported in an annulus")
        lam = {int(k): complex(v) for k, v in self.lambdas.items()}
        if not all(math.isfinite(abs(v)) for v in lam.values()):
            raise ValueError("scale coefficients must be finite")
        object.__setattr__(self, "lambdas", dict(sorted(lam.items())))

    @property
    def k_range(self) -> tuple[int, int] | None:
        if not self.lambdas:
            return None
        ks = list(self.lambdas)
        return ks[0], ks[-1]

    @property
    def sup_lambda(self) -> float:
        return max((abs(v) for v in self.lambdas.values()), default=0.0)


def default_scale_range(geo: GridGeometry) -> tuple[int, int]:
    """``[-log2 L + 1, log2(N / (8 L))]`` rounded inward."""
    lo = math.ceil(1.0 - math.log2(geo.l) - 1e-12)
    hi = math.floor(math.log2(geo.n / (8.0 * geo.l)) + 1e-12)
    return lo, hi


@lru_cache(maxsize=4096)
def _clipped_mass(profile: SchwartzProfile, k: int, nyquist: float) -> float:
    r = profile.radius
    u = np.linspace(-r, r, 8193)
    w = np.abs(np.asarray(profile.spectrum(u))) ** 2
    total = float(np.sum(w))
    if total == 0.0:
        return 0.0
    return float(np.sum(w[np.abs(u) > nyquist * 2.0 ** (-k)])) / total


def _nyquist_check(profile: SchwartzProfile, k: int, geo: GridGeometry, stacklevel: int = 3) -> None:
    if 2.0 ** (k + 1) * profile.radius > geo.nyquist:
        mass = _clipped_mass(profile, k, geo.nyquist)
        warnings.warn(
            NyquistWarning(
                f"profile {profile.name} at scale {k} exceeds the Nyquist margin "
                f"(clipped spectral mass {mass:.3g})",
                mass,
            ),
            stacklevel=stacklevel,
        )


def _axis_filter(profile: SchwartzProfile, k: int, geo: GridGeometry) -> np.ndarray:
    return np.asarray(profile.spectrum(np.ldexp(geo.freqs, -k)), dtype=np.complex128) * geo.keep


def partial_convolution(
    f: GridFunction2D, axis: str, profile: SchwartzProfile, k: int, warn: bool = True
) -> GridFunction2D:
    """One-axis convolution with ``phi_k(t) = 2^k phi(2^k t)``.

    Implemented as the multiplier ``phi_hat(2^-k xi)`` on ``axis``.

    Warns
    -----
    NyquistWarning
        When ``2^{k+1} R`` exceeds the Nyquist frequency, ``R`` the spectral radius.
    """
    if f.spectral != (False, False):
        raise ValueError("partial_convolution expects a spatial grid function")
    geo = f.geometry
    if warn:
        _nyquist_check(profile, k, geo)
    filt = _axis_filter(profile, k, geo)
    if axis == "x":
        vals = np.fft.ifft(np.fft.fft(f.values, axis=0) * filt[:, None], axis=0)
    elif axis == "y":
        vals = np.fft.ifft(np.fft.fft(f.values, axis=1) * filt[None, :], axis=1)
    else:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    return f.with_values(vals)


_LP = annular_profile()


def littlewood_paley(f: GridFunction2D, axis: str, k: int, warn: bool = True) -> GridFunction2D:
    """Littlewood-Paley projection ``Delta_k`` with multiplier ``vartheta(2^-k xi)``."""
    return partial_convolution(f, axis, _LP, k, warn)


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


def _check_pair(f: GridFunction2D, g: GridFunction2D) -> GridGeometry:
    if f.geometry != g.geometry:
        raise ValueError("inputs live on different grids")
    if f.spectral != (False, False) or g.spectral != (False, False):
        raise ValueError("operators expect spatial grid functions")
    return f.geometry


def apply_paraproduct(
    spec: ParaproductSpec, f: GridFunction2D, g: GridFunction2D, warn: bool = True
) -> GridFunction2D:
    """Twisted paraproduct ``sum_k lambda_k P^{phi_k}_x f * P^{psi_k}_y g``.

    Cost is ``O(K N^2 log N)`` for ``K`` scales.
    """
    geo = _check_pair(f, g)
    fx = np.fft.fft(f.values, axis=0)
    gy = np.fft.fft(g.values, axis=1)
    out = np.zeros((geo.n, geo.n), dtype=np.complex128)
    for k, lam in spec.lambdas.items():
        if lam == 0:
            continue
        if warn:
            _nyquist_check(spec.phi, k, geo)
            _nyquist_check(spec.psi, k, geo)
        pf = np.fft.ifft(fx * _axis_filter(spec.phi, k, geo)[:, None], axis=0)
        pg = np.fft.ifft(gy * _axis_filter(spec.psi, k, geo)[None, :], axis=1)
        out += lam * pf * pg
    return GridFunction2D(geo, out)


def _phase_matrix(geo: GridGeometry) -> np.ndarray:
    """``E[j, m] = exp(2 pi i x_j xi_m)`` computed from the exact integer product."""
    j = np.arange(geo.n)
    return np.exp(2j * math.pi * ((np.outer(j, j) % geo.n) / geo.n))


def apply_twisted_multiplier(m: TwistedSymbol, f: GridFunction2D, g: GridFunction2D) -> GridFunction2D:
    """Generic twisted multiplier ``T_m(f, g)``.

    For each ``xi_1`` the ``eta_2`` sum is an inverse FFT along ``y`` of
    ``m(xi_1, .) (F_y g)(x, .)``, giving total cost ``O(N^3 log N)``. Rows where
    the symbol or ``F_x f`` vanish identically are skipped.
    """
    geo = _check_pair(f, g)
    n = geo.n
    M = m.on_grid(geo)
    fx = np.fft.fft(f.values, axis=0) * geo.dx  # (xi_1, y)
    gy = np.fft.fft(g.values, axis=1) * geo.dx  # (x, eta_2)
    active = np.flatnonzero(np.any(M != 0, axis=1) & np.any(fx != 0, axis=1))
    out = np.zeros((n, n), dtype=np.complex128)
    if active.size == 0:
        return GridFunction2D(geo, out)
    E = _phase_matrix(geo)
    scale = 1.0 / geo.l ** 2
    step = max(1, _BLOCK // (n * n))
    for s in range(0, active.size, step):
        rows = active[s : s + step]
        # W[c, x, y] = sum_eta2 M[c, eta2] gy[x, eta2] exp(2 pi i y eta2)
        W = np.fft.ifft(M[rows][:, None, :] * gy[None, :, :], axis=2) * n
        out += np.einsum("xc,cy,cxy->xy", E[:, rows], fx[rows], W, optimize=True)
    return GridFunction2D(geo, out * scale)


def apply_spatial_multiplier(sigma: SpatialSymbol, f: GridFunction2D, g: GridFunction2D) -> GridFunction2D:
    """Direct ``O(N^4)`` evaluation of ``T_sigma(f, g)``.

    ``sigma`` is tabulated on ``(x, y, xi_1, eta_2)`` one block of rows at a time.
    Intended for ``N <= 128``.
    """
    geo = _check_pair(f, g)
    n = geo.n
    E = _phase_matrix(geo)
    fx = np.fft.fft(f.values, axis=0) * geo.dx
    gy = np.fft.fft(g.values, axis=1) * geo.dx
    A = E[:, :, None] * fx[None, :, :]  # (x, xi_1, y)
    B = gy[:, None, :] * E[None, :, :]  # (x, y, eta_2)
    out = np.empty((n, n), dtype=np.complex128)
    step = max(1, _BLOCK // n ** 3)
    for s in range(0, n, step):
        rows = np.arange(s, min(n, s + step))
        S = sigma.tabulate(geo, rows)  # (c, y, xi_1, eta_2)
        out[rows] = np.einsum("cyij,ciy,cyj->cy", S, A[rows], B[rows], optimize=True)
    return GridFunction2D(geo, out / geo.l ** 2)


def apply_separable(
    terms: Sequence[SeparableTerm], f: GridFunction2D, g: GridFunction2D
) -> GridFunction2D:
    """``sum coef * fx(D_x) f * fy(D_y) g`` with Nyquist modes zeroed."""
    geo = _check_pair(f, g)
    fr = geo.freqs
    fxh = np.fft.fft(f.values, axis=0)
    gyh = np.fft.fft(g.values, axis=1)
    out = np.zeros((geo.n, geo.n), dtype=np.complex128)
    for t in terms:
        px = np.asarray(t.fx(fr), dtype=np.complex128) * geo.keep
        py = np.asarray(t.fy(fr), dtype=np.complex128) * geo.keep
        if not (np.any(px) and np.any(py)):
            continue
        out += t.coef * np.fft.ifft(fxh * px[:, None], axis=0) * np.fft.ifft(gyh * py[None, :], axis=1)
    return GridFunction2D(geo, out)


def apply_symbol(m: TwistedSymbol, f: GridFunction2D, g: GridFunction2D) -> GridFunction2D:
    """``T_m(f, g)`` using the separable form of ``m`` when it has one."""
    if m.separable is not None:
        return apply_separable(m.separable(f.geometry), f, g)
    return apply_twisted_multiplier(m, f, g)
