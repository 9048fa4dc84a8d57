"""Periodic grid functions, spectral transforms, norms and test-function generators.

Functions on the plane are modelled on the periodic box ``[0, L)^2`` sampled at
``N x N`` points.  Transforms use Riemann-sum scaling so that discrete quantities
approximate the continuum integrals:

    forward:  f_hat(xi_m) = (L/N) sum_j f(x_j) exp(-2 pi i x_j xi_m)
    inverse:  f(x_j)      = (1/L) sum_m f_hat(xi_m) exp(2 pi i x_j xi_m)

with ``x_j = j L / N`` and ``xi_m = m / L``.  Arrays are stored in FFT order, so
index ``N // 2`` along a frequency axis is the unpaired mode ``-N/(2L)``.  That
mode is zeroed by every multiplier in this package.

Axis 0 of ``values`` is ``x`` and axis 1 is ``y``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Callable, Literal, Sequence

import numpy as np

__all__ = [
    "GridGeometry",
    "GridFunction2D",
    "Generator",
    "SupportViolationError",
    "GfnFormatError",
    "forward_transform",
    "inverse_transform",
    "fourier_multiplier",
    "lp_norm",
    "sobolev_norm",
    "mixed_sobolev_norm",
    "partial_derivative",
    "translate",
    "modulate",
    "sample",
    "dilate_generator",
    "gaussian",
    "wave_packet",
    "band_limited_random",
    "lemma_phi",
    "lemma_psi",
    "write_gfn",
    "read_gfn",
]

Axes = Literal["x", "y", "both"]
_AXIS_INDEX = {"x": 0, "y": 1}

#: relative boundary magnitude above which a sample is considered aliased
SUPPORT_TOLERANCE = 1e-8


class SupportViolationError(ValueError):
    """A function or symbol leaves the region where it is required to vanish."""


class GfnFormatError(ValueError):
    """A ``.gfn`` file has a malformed header or payload."""


# ---------------------------------------------------------------------------
# Geometry and grid functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridGeometry:
    """Periodic ``N x N`` grid on the box ``[0, L)^2``.

    Parameters
    ----------
    n : int
        Samples per axis. Must be a power of two and at least 8.
    l : float
        Side length of the box.
    """

    n: int = 128
    l: float = 16.0

    def __post_init__(self) -> None:
        n = self.n
        if isinstance(n, bool) or int(n) != n or n < 8 or (int(n) & (int(n) - 1)):
            raise ValueError(f"grid size must be a power of two >= 8, got {n!r}")
        if not (math.isfinite(self.l) and self.l > 0):
            raise ValueError(f"box length must be positive, got {self.l!r}")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "l", float(self.l))

    @property
    def dx(self) -> float:
        return self.l / self.n

    @property
    def nyquist(self) -> float:
        """Largest representable frequency magnitude, ``N / (2L)``."""
        return self.n / (2.0 * self.l)

    @cached_property
    def points(self) -> np.ndarray:
        """Sample points ``j L / N`` along one axis."""
        pts = np.arange(self.n) * self.dx
        pts.flags.writeable = False
        return pts

    @cached_property
    def freqs(self) -> np.ndarray:
        """Frequencies ``m / L`` along one axis, in FFT order."""
        fr = np.fft.fftfreq(self.n, d=self.dx)
        fr.flags.writeable = False
        return fr

    @cached_property
    def keep(self) -> np.ndarray:
        """1.0 at every frequency index except the unpaired ``-N/2`` mode."""
        k = np.ones(self.n)
        k[self.n // 2] = 0.0
        k.flags.writeable = False
        return k

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Spatial sample mesh ``(X, Y)`` with ``X[j, l] = x_j``."""
        return np.meshgrid(self.points, self.points, indexing="ij")

    def freq_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.freqs, self.freqs, indexing="ij")

    def is_grid_frequency(self, xi: float, tol: float = 1e-9) -> bool:
        m = xi * self.l
        return abs(m - round(m)) <= tol and abs(xi) < self.nyquist


@dataclass(frozen=True, eq=False)
class GridFunction2D:
    """Complex samples on a periodic grid.

    Parameters
    ----------
    geometry : GridGeometry
    values : ndarray of shape (N, N)
        ``values[j, l]`` is the sample at ``(x_j, y_l)``, or the coefficient at the
        corresponding frequency on axes flagged in ``spectral``.
    spectral : tuple of bool
        Which axes currently hold frequency coefficients, ``(x, y)``.
    """

    geometry: GridGeometry
    values: np.ndarray
    spectral: tuple[bool, bool] = (False, False)

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.complex128)
        n = self.geometry.n
        if arr.shape != (n, n):
            raise ValueError(f"values must have shape {(n, n)}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("grid function values must be finite")
        view = arr.view()
        view.flags.writeable = False
        object.__setattr__(self, "values", view)
        object.__setattr__(self, "spectral", (bool(self.spectral[0]), bool(self.spectral[1])))

    @classmethod
    def from_function(
        cls, geometry: GridGeometry, func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    ) -> "GridFunction2D":
        x, y = geometry.mesh()
        return cls(geometry, np.broadcast_to(func(x, y), (geometry.n, geometry.n)))

    @classmethod
    def zeros(cls, geometry: GridGeometry) -> "GridFunction2D":
        return cls(geometry, np.zeros((geometry.n, geometry.n), dtype=np.complex128))

    def with_values(self, values: np.ndarray) -> "GridFunction2D":
        return GridFunction2D(self.geometry, values, self.spectral)

    def _check_compatible(self, other: "GridFunction2D") -> None:
        if self.geometry != other.geometry or self.spectral != other.spectral:
            raise ValueError("grid functions live on different grids or domains")

    def __add__(self, other: "GridFunction2D") -> "GridFunction2D":
        self._check_compatible(other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "GridFunction2D") -> "GridFunction2D":
        self._check_compatible(other)
        return self.with_values(self.values - other.values)

    def __mul__(self, other: "complex | GridFunction2D") -> "GridFunction2D":
        if isinstance(other, GridFunction2D):
            self._check_compatible(other)
            return self.with_values(self.values * other.values)
        return self.with_values(self.values * other)

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction2D":
        return self.with_values(-self.values)

    def conj(self) -> "GridFunction2D":
        return self.with_values(np.conj(self.values))

    def l2_distance(self, other: "GridFunction2D") -> float:
        self._check_compatible(other)
        return float(np.linalg.norm(self.values - other.values))


# ---------------------------------------------------------------------------
# Transforms and multipliers
# ---------------------------------------------------------------------------


def _axes_tuple(axes: Axes) -> tuple[int, ...]:
    if axes == "both":
        return (0, 1)
    if axes in _AXIS_INDEX:
        return (_AXIS_INDEX[axes],)
    raise ValueError(f"axes must be 'x', 'y' or 'both', got {axes!r}")


def forward_transform(f: GridFunction2D, axes: Axes = "both") -> GridFunction2D:
    """Riemann-sum Fourier transform along the requested axes.

    Parameters
    ----------
    f : GridFunction2D
        Function whose requested axes are in the spatial domain.
    axes : {'x', 'y', 'both'}

    Returns
    -------
    GridFunction2D
        Coefficients ``(L/N) * fft`` in FFT order on the transformed axes.
    """
    idx = _axes_tuple(axes)
    if any(f.spectral[a] for a in idx):
        raise ValueError("axis already in the frequency domain")
    geo = f.geometry
    vals = np.fft.fftn(f.values, axes=idx) * (geo.dx ** len(idx))
    spectral = tuple(f.spectral[a] or a in idx for a in (0, 1))
    return GridFunction2D(geo, vals, spectral)


def inverse_transform(f: GridFunction2D, axes: Axes = "both") -> GridFunction2D:
    """Inverse of :func:`forward_transform`, ``(N/L) * ifft`` per axis."""
    idx = _axes_tuple(axes)
    if not all(f.spectral[a] for a in idx):
        raise ValueError("axis is not in the frequency domain")
    geo = f.geometry
    vals = np.fft.ifftn(f.values, axes=idx) * ((geo.n / geo.l) ** len(idx))
    spectral = tuple(f.spectral[a] and a not in idx for a in (0, 1))
    return GridFunction2D(geo, vals, spectral)


def fourier_multiplier(
    f: GridFunction2D,
    symbol_x: Callable[[np.ndarray], np.ndarray] | None = None,
    symbol_y: Callable[[np.ndarray], np.ndarray] | None = None,
    symbol_xy: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
    zero_nyquist: bool = True,
) -> GridFunction2D:
    """Apply a Fourier multiplier to a spatial grid function.

    The multiplier is the product of the supplied factors evaluated at grid
    frequencies. The ``-N/2`` mode is zeroed on every axis a factor acts on
    unless ``zero_nyquist`` is false, which is safe only for even real factors.
    """
    if f.spectral != (False, False):
        raise ValueError("fourier_multiplier expects a spatial grid function")
    geo = f.geometry
    fr = geo.freqs
    touch_x = symbol_x is not None or symbol_xy is not None
    touch_y = symbol_y is not None or symbol_xy is not None
    if not (touch_x or touch_y):
        return f
    idx = tuple(a for a, t in ((0, touch_x), (1, touch_y)) if t)
    mult = np.ones((geo.n, geo.n), dtype=np.complex128)
    if symbol_xy is not None:
        t1, t2 = geo.freq_mesh()
        mult = mult * symbol_xy(t1, t2)
    if symbol_x is not None:
        mult = mult * np.asarray(symbol_x(fr))[:, None]
    if symbol_y is not None:
        mult = mult * np.asarray(symbol_y(fr))[None, :]
    if touch_x and zero_nyquist:
        mult = mult * geo.keep[:, None]
    if touch_y and zero_nyquist:
        mult = mult * geo.keep[None, :]
    vals = np.fft.ifftn(np.fft.fftn(f.values, axes=idx) * mult, axes=idx)
    return f.with_values(vals)


# ---------------------------------------------------------------------------
# Norms, derivatives, translations
# ---------------------------------------------------------------------------


def lp_norm(f: GridFunction2D, p: float) -> float:
    """Quadrature ``L^p`` norm ``((L/N)^2 sum |f|^p)^(1/p)``."""
    if not math.isfinite(p) or p <= 0:
        raise ValueError(f"p must be a finite positive number, got {p!r}")
    if f.spectral != (False, False):
        raise ValueError("lp_norm expects a spatial grid function")
    w = f.geometry.dx ** 2
    a = np.abs(f.values)
    if p == 2:
        return float(math.sqrt(w * np.sum(a * a)))
    return float((w * np.sum(a ** p)) ** (1.0 / p))


def _bessel_weight(s: float) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    c = 4.0 * math.pi ** 2

    def weight(t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
        return (1.0 + c * (t1 * t1 + t2 * t2)) ** (s / 2.0)

    return weight


def sobolev_norm(f: GridFunction2D, s: float, p: float) -> float:
    """Non-homogeneous Sobolev norm ``||(1 - Delta)^{s/2} f||_p``.

    The multiplier is ``(1 + 4 pi^2 |xi|^2)^{s/2}`` on both axes; ``s = 0`` is
    exactly :func:`lp_norm`. The weight is even and real, so the ``-N/2`` mode
    is kept; zeroing it would make the norm jump between ``s = 0`` and ``s > 0``.
    """
    if s < 0:
        raise ValueError(f"smoothness must be nonnegative, got {s!r}")
    if s == 0:
        return lp_norm(f, p)
    return lp_norm(fourier_multiplier(f, symbol_xy=_bessel_weight(s), zero_nyquist=False), p)


def mixed_sobolev_norm(f: GridFunction2D, s: float, p: float) -> float:
    """Mixed Sobolev norm ``||(1 - d_x^2)^{s/2} f||_p`` acting on ``x`` only."""
    if s < 0:
        raise ValueError(f"smoothness must be nonnegative, got {s!r}")
    if s == 0:
        return lp_norm(f, p)
    c = 4.0 * math.pi ** 2
    return lp_norm(fourier_multiplier(f, symbol_x=lambda t: (1.0 + c * t * t) ** (s / 2.0), zero_nyquist=False), p)


MAX_DERIVATIVE_ORDER = 6


def partial_derivative(f: GridFunction2D, axis: str, order: int) -> GridFunction2D:
    """Spectral partial derivative with multiplier ``(2 pi i xi)^order``."""
    if int(order) != order or order < 0:
        raise ValueError(f"derivative order must be a nonnegative integer, got {order!r}")
    if order > MAX_DERIVATIVE_ORDER:
        raise ValueError(f"derivative order above {MAX_DERIVATIVE_ORDER} is not supported")
    if axis not in _AXIS_INDEX:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    if order == 0:
        return f
    sym = lambda t: (2j * math.pi * t) ** int(order)  # noqa: E731
    if axis == "x":
        return fourier_multiplier(f, symbol_x=sym)
    return fourier_multiplier(f, symbol_y=sym)


def translate(f: GridFunction2D, v: Sequence[float], tol: float = 1e-12) -> GridFunction2D:
    """Shift a grid function so that the result at ``(x, y)`` is ``f(x + v_x, y + v_y)``.

    Shifts that are whole multiples of the grid spacing rotate the sample array
    and are exact. Other shifts multiply the spectrum by ``exp(2 pi i xi . v)``.
    """
    geo = f.geometry
    vx, vy = float(v[0]), float(v[1])
    steps = (vx / geo.dx, vy / geo.dx)
    if all(abs(s - round(s)) <= tol * max(1.0, abs(s)) for s in steps):
        return f.with_values(np.roll(f.values, (-int(round(steps[0])), -int(round(steps[1]))), axis=(0, 1)))
    return fourier_multiplier(
        f,
        symbol_x=lambda t: np.exp(2j * math.pi * t * vx),
        symbol_y=lambda t: np.exp(2j * math.pi * t * vy),
    )


def modulate(f: GridFunction2D, xi: Sequence[float]) -> GridFunction2D:
    """Multiply by the plane wave ``exp(2 pi i (xi_1 x + xi_2 y))``."""
    x, y = f.geometry.mesh()
    return f.with_values(f.values * np.exp(2j * math.pi * (xi[0] * x + xi[1] * y)))


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

GeneratorKind = Literal["gaussian", "wave_packet", "band_limited_random", "lemma_phi", "lemma_psi"]
_KINDS = ("gaussian", "wave_packet", "band_limited_random", "lemma_phi", "lemma_psi")


@dataclass(frozen=True)
class Generator:
    """Analytic description of a test function.

    ``xscale`` records non-isotropic dilations: the generator evaluates
    ``base(xscale * x, y)`` where ``base`` is the undilated function.

    Parameters
    ----------
    kind : str
        One of ``gaussian``, ``wave_packet``, ``band_limited_random``,
        ``lemma_phi`` and ``lemma_psi``.
    center : (float, float)
        Centre of localized kinds, before dilation.
    width : (float, float)
        Gaussian standard deviations ``(w_x, w_y)`` of the envelope.
    modulation : (float, float)
        Carrier frequency ``(xi_1, xi_2)``; the phase is referenced to ``center``.
    eps : float
        Scale ``epsilon``. Envelopes are evaluated at ``eps * (x - center)``.
    seed : int
        Seed for ``band_limited_random``.
    annulus : (float, float)
        Radii ``lo <= |xi| < hi`` of the random spectrum.
    lattice : (float, float)
        Frequency lattice spacing of the random spectrum per axis.
    """

    kind: GeneratorKind
    center: tuple[float, float] = (0.0, 0.0)
    width: tuple[float, float] = (1.0, 1.0)
    modulation: tuple[float, float] = (0.0, 0.0)
    eps: float = 1.0
    seed: int = 0
    annulus: tuple[float, float] = (0.25, 1.0)
    lattice: tuple[float, float] = (1.0 / 16, 1.0 / 16)
    xscale: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        for name in ("center", "width", "modulation", "annulus", "lattice"):
            val = getattr(self, name)
            object.__setattr__(self, name, (float(val[0]), float(val[1])))
        if self.eps <= 0 or min(self.width) <= 0 or self.xscale <= 0:
            raise ValueError("eps, widths and xscale must be positive")

    @property
    def widths(self) -> tuple[float, float]:
        """Envelope standard deviations after dilation and ``eps`` scaling."""
        return (self.width[0] / (self.eps * self.xscale), self.width[1] / self.eps)

    @property
    def dilated_center(self) -> tuple[float, float]:
        return (self.center[0] / self.xscale, self.center[1])

    @cached_property
    def modes(self) -> tuple[np.ndarray, np.ndarray]:
        """Frequencies and coefficients of ``band_limited_random`` (undilated)."""
        lo, hi = self.annulus
        dx, dy = self.lattice
        mx, my = int(math.ceil(hi / dx)), int(math.ceil(hi / dy))
        i, j = np.meshgrid(np.arange(-mx, mx + 1), np.arange(-my, my + 1), indexing="ij")
        xi = np.stack([i.ravel() * dx, j.ravel() * dy], axis=1)
        r = np.hypot(xi[:, 0], xi[:, 1])
        xi = xi[(r >= lo) & (r < hi)]
        rng = np.random.default_rng(self.seed)
        coef = (rng.standard_normal(len(xi)) + 1j * rng.standard_normal(len(xi))) / math.sqrt(2.0)
        return xi, coef

    def spectrum(self, xi1: np.ndarray, xi2: np.ndarray) -> np.ndarray:
        """Continuum Fourier transform of the lemma kinds, after dilation."""
        from .cutoffs import theta  # local import: cutoffs depends on nothing here

        if self.kind not in ("lemma_phi", "lemma_psi"):
            raise ValueError("closed-form spectrum only for lemma kinds")
        s, e = self.xscale, self.eps
        c1, c2 = self.center
        u1 = np.asarray(xi1) / s
        u2 = np.asarray(xi2)
        b1 = (u1 - self.modulation[0]) / e
        b2 = (u2 - self.modulation[1]) / e
        if self.kind == "lemma_phi":
            base = theta(b1) * theta(b2) / e ** 2
        else:
            base = theta(b1 / 4.0) * theta(b2 / 4.0) / e ** 2
        phase = np.exp(-2j * math.pi * (c1 * u1 + c2 * u2))
        return base * phase / s

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Evaluate the generator at arbitrary points.

        The lemma kinds are evaluated by direct summation of their spectra over
        a frequency lattice of spacing ``1/64``, so this is meant for spot
        checks only; :func:`sample` uses exact grid spectra instead.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        xs = self.xscale * x
        if self.kind in ("gaussian", "wave_packet"):
            c1, c2 = self.center
            w1, w2 = self.width
            e = self.eps if self.kind == "wave_packet" else 1.0
            env = np.exp(-0.5 * ((e * (xs - c1) / w1) ** 2 + (e * (y - c2) / w2) ** 2))
            if self.kind == "gaussian":
                return env.astype(np.complex128)
            k1, k2 = self.modulation
            return env * np.exp(2j * math.pi * (k1 * (xs - c1) + k2 * (y - c2)))
        if self.kind == "band_limited_random":
            xi, coef = self.modes
            out = np.zeros(np.broadcast(xs, y).shape, dtype=np.complex128)
            for (a, b), c in zip(xi, coef):
                out += c * np.exp(2j * math.pi * (a * xs + b * y))
            return out
        raise ValueError("lemma kinds are sampled spectrally; use sample()")


def gaussian(
    center: Sequence[float], width: float | Sequence[float] = 1.0
) -> Generator:
    """Gaussian ``exp(-|x - c|^2 / (2 w^2))`` with peak value 1."""
    w = (width, width) if np.isscalar(width) else tuple(width)
    return Generator("gaussian", center=tuple(center), width=w)


def wave_packet(
    center: Sequence[float],
    width: float | Sequence[float] = 1.0,
    modulation: Sequence[float] = (0.0, 0.0),
    eps: float = 1.0,
) -> Generator:
    """Gaussian envelope at scale ``eps`` times a plane wave referenced to the centre."""
    w = (width, width) if np.isscalar(width) else tuple(width)
    return Generator("wave_packet", center=tuple(center), width=w, modulation=tuple(modulation), eps=eps)


def band_limited_random(
    geo: GridGeometry,
    annulus: Sequence[float] = (0.25, 1.0),
    seed: int = 0,
    x_step: int = 1,
) -> Generator:
    """Random trigonometric polynomial with spectrum on a lattice annulus.

    The lattice spacing is ``x_step / L`` along ``x`` and ``1 / L`` along ``y``;
    ``x_step = 2^A`` keeps dilations ``D_a`` with ``a <= A`` grid-aligned.
    Coefficients are i.i.d. standard complex Gaussians drawn from
    ``numpy.random.default_rng(seed)``.
    """
    return Generator(
        "band_limited_random",
        annulus=tuple(annulus),
        seed=int(seed),
        lattice=(x_step / geo.l, 1.0 / geo.l),
    )


def lemma_phi(
    center: Sequence[float], modulation: Sequence[float] = (0.0, 0.0), eps: float = 1.0
) -> Generator:
    """``exp(2 pi i xi0 . (x - c)) Phi(eps (x - c))`` with ``Phi_hat = theta x theta``.

    Samples are normalized to take the value 1 at the centre.
    """
    return Generator("lemma_phi", center=tuple(center), modulation=tuple(modulation), eps=eps)


def lemma_psi(
    center: Sequence[float], modulation: Sequence[float] = (0.0, 0.0), eps: float = 1.0
) -> Generator:
    """``exp(2 pi i zeta0 . (x - c)) Psi(eps (x - c))`` with ``Psi_hat`` equal to 1 on ``[-2, 2]^2``.

    ``Psi_hat(xi) = theta(xi_1 / 4) theta(xi_2 / 4)``.
    """
    return Generator("lemma_psi", center=tuple(center), modulation=tuple(modulation), eps=eps)


def _boundary_ratio(values: np.ndarray) -> float:
    a = np.abs(values)
    peak = float(a.max())
    if peak == 0.0:
        return 0.0
    edge = max(a[0, :].max(), a[-1, :].max(), a[:, 0].max(), a[:, -1].max())
    return float(edge) / peak


def sample(gen: Generator, geo: GridGeometry) -> GridFunction2D:
    """Sample a generator on the grid.

    Localized kinds are evaluated pointwise and must be negligible on the box
    boundary. ``band_limited_random`` must lie on the grid's frequency lattice.
    The lemma kinds are synthesized from their spectra at grid frequencies.

    Raises
    ------
    SupportViolationError
        When the boundary magnitude exceeds ``1e-8`` times the peak, or when a
        random spectrum is not representable on the grid.
    """
    if gen.kind in ("gaussian", "wave_packet"):
        x, y = geo.mesh()
        vals = gen.evaluate(x, y)
        ratio = _boundary_ratio(vals)
        if ratio >= SUPPORT_TOLERANCE:
            raise SupportViolationError(
                f"{gen.kind} boundary magnitude {ratio:.3g} x peak exceeds {SUPPORT_TOLERANCE:g}"
            )
        return GridFunction2D(geo, vals)

    if gen.kind == "band_limited_random":
        xi, coef = gen.modes
        xi = xi * np.array([gen.xscale, 1.0])
        m = xi * geo.l
        if np.any(np.abs(m - np.round(m)) > 1e-9) or np.any(np.abs(xi) >= geo.nyquist):
            raise SupportViolationError("random spectrum is not on the grid's frequency lattice")
        spec = np.zeros((geo.n, geo.n), dtype=np.complex128)
        idx = np.round(m).astype(int) % geo.n
        np.add.at(spec, (idx[:, 0], idx[:, 1]), coef * geo.l ** 2)
        return inverse_transform(GridFunction2D(geo, spec, (True, True)))

    # lemma kinds: exact band-limited synthesis from the continuum spectrum
    t1, t2 = geo.freq_mesh()
    spec = gen.spectrum(t1, t2)
    spec = spec * geo.keep[:, None] * geo.keep[None, :]
    if gen.kind == "lemma_phi":
        c1, c2 = gen.dilated_center
        at_center = np.sum(spec * np.exp(2j * math.pi * (t1 * c1 + t2 * c2))) / geo.l ** 2
        if abs(at_center) == 0.0:
            raise SupportViolationError("lemma_phi spectrum misses every grid frequency")
        spec = spec / at_center
    return inverse_transform(GridFunction2D(geo, spec, (True, True)))


def dilate_generator(gen: Generator, a: int, geo: GridGeometry | None = None) -> Generator:
    """Non-isotropic dilation ``D_a h(x, y) = h(2^{-a} x, y)``.

    Parameters
    ----------
    gen : Generator
    a : int
    geo : GridGeometry, optional
        When given, the dilated generator is sampled once so that a support
        violation surfaces here rather than later.
    """
    if int(a) != a:
        raise ValueError("dilation exponent must be an integer")
    out = gen if a == 0 else replace(gen, xscale=gen.xscale * 2.0 ** (-int(a)))
    if geo is not None:
        sample(out, geo)
    return out


# ---------------------------------------------------------------------------
# .gfn file format
# ---------------------------------------------------------------------------


def write_gfn(path: str | Path, f: GridFunction2D) -> None:
    """Write a spatial grid function as a ``.gfn`` file."""
    if f.spectral != (False, False):
        raise ValueError("only spatial grid functions can be written")
    header = {"n": f.geometry.n, "l": f.geometry.l, "layout": "row-major", "dtype": "c128"}
    payload = np.ascontiguousarray(f.values, dtype="<c16").tobytes()
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("ascii") + b"\n")
        fh.write(payload)


def read_gfn(path: str | Path) -> GridFunction2D:
    """Read a ``.gfn`` file, rejecting malformed headers and byte counts."""
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise GfnFormatError("missing header line")
    try:
        header = json.loads(raw[:nl].decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise GfnFormatError(f"unreadable header: {exc}") from exc
    if not isinstance(header, dict) or header.get("layout") != "row-major" or header.get("dtype") != "c128":
        raise GfnFormatError("header must declare layout 'row-major' and dtype 'c128'")
    try:
        geo = GridGeometry(header["n"], header["l"])
    except (KeyError, TypeError, ValueError) as exc:
        raise GfnFormatError(f"invalid geometry in header: {exc}") from exc
    body = raw[nl + 1 :]
    expected = geo.n * geo.n * 16
    if len(body) != expected:
        raise GfnFormatError(f"payload has {len(body)} bytes, expected {expected}")
    vals = np.frombuffer(body, dtype="<c16").reshape(geo.n, geo.n).astype(np.complex128)
    return GridFunction2D(geo, vals)

