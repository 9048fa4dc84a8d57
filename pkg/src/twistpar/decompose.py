"""Decomposition of a cone-supported symbol into twisted paraproducts.

With ``a`` the smallest nonnegative integer such that ``c <= 2^a``, the slices

    m_k(tau) = m(tau) theta(2^{-k-a-3} tau_1) vartheta(2^{-k} tau_2)

are supported in ``|tau_1| <= 2^{k+a+3}``, ``2^{k-1} <= |tau_2| <= 2^{k+1}``.  Each
is expanded in a Fourier series on ``[-B_k, B_k]^2`` with ``B_k = 2^{k+a+4}``:

    m_k(tau) = sum_n kappa^{(k)}_n exp(i pi (n_1 tau_1 + n_2 tau_2) / B_k)

and ``m`` is rebuilt as

    sum_{i in {-1,0,1}} sum_n sum_k kappa^{(k)}_n phi_hat^{(n_1)}(2^-k tau_1) psi_hat^{(n_2,i)}(2^-k tau_2).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .cutoffs import make_modulated, theta, vartheta
from .grid import GridFunction2D, GridGeometry, SupportViolationError
from .operators import ParaproductSpec, TwistedSymbol, _check_pair

__all__ = [
    "QuadratureResolutionError",
    "DyadicSlice",
    "FourierSeriesCoeffs",
    "Decomposition",
    "ReconstructionReport",
    "DecayReport",
    "shift_exponent",
    "slice_symbol",
    "fourier_coefficients",
    "decompose",
    "reconstruct_symbol",
    "synthesize_paraproducts",
    "apply_decomposed",
    "decay_report",
    "grid_scale_range",
    "export_decomposition",
    "import_decomposition",
]

I_LIST = (-1, 0, 1)
KAPPA_TOL = 1e-8


class QuadratureResolutionError(RuntimeError):
    """Doubling the quadrature resolution moved some coefficient by more than the tolerance."""


def shift_exponent(c: float) -> int:
    """Smallest integer ``a >= 0`` with ``c <= 2^a``."""
    if not c > 0:
        raise ValueError(f"support constant must be positive, got {c!r}")
    a = max(0, math.ceil(math.log2(c)))
    while a > 0 and c <= 2.0 ** (a - 1):
        a -= 1
    while c > 2.0 ** a:
        a += 1
    return a


@dataclass(frozen=True)
class DyadicSlice:
    """Slice ``m_k`` of a cone-supported symbol.

    Attributes
    ----------
    symbol : TwistedSymbol
    k : int
    a : int
    """

    symbol: TwistedSymbol
    k: int
    a: int

    @property
    def half_width(self) -> float:
        """Half side ``2^{k+a+4}`` of the Fourier-series box."""
        return 2.0 ** (self.k + self.a + 4)

    @property
    def support_box(self) -> tuple[float, float, float]:
        """``(tau_1 bound, inner tau_2 radius, outer tau_2 radius)``."""
        return 2.0 ** (self.k + self.a + 3), 2.0 ** (self.k - 1), 2.0 ** (self.k + 1)

    def __call__(self, t1: np.ndarray | float, t2: np.ndarray | float) -> np.ndarray:
        t1, t2 = np.broadcast_arrays(np.asarray(t1, dtype=float), np.asarray(t2, dtype=float))
        b1, lo, hi = self.support_box
        a2 = np.abs(t2)
        inside = (np.abs(t1) < b1) & (a2 > lo) & (a2 < hi)
        out = np.zeros(t1.shape, dtype=np.complex128)
        if np.any(inside):
            u1, u2 = t1[inside], t2[inside]
            out[inside] = (
                self.symbol(u1, u2)
                * theta(np.ldexp(u1, -(self.k + self.a + 3)))
                * vartheta(np.ldexp(u2, -self.k))
            )
        return out if out.ndim else out[()]


def slice_symbol(m: TwistedSymbol, k: int, a: int | None = None, check: bool = True) -> DyadicSlice:
    """Dyadic slice ``m_k``.

    Raises
    ------
    SupportViolationError
        If ``m`` has no support constant, or is nonzero outside its cone.
    """
    c = m.support_constant
    if c is None:
        raise SupportViolationError(f"symbol {m.name} has no support constant; slicing needs |tau_1| <= c|tau_2|")
    if a is None:
        a = shift_exponent(c) if c > 0 else 0
    elif c > 2.0 ** a:
        raise ValueError(f"shift exponent {a} too small for support constant {c:g}")
    if check:
        m.check_support()
    return DyadicSlice(m, int(k), int(a))


@dataclass(frozen=True, eq=False)
class FourierSeriesCoeffs:
    """Fourier coefficients of one slice.

    Attributes
    ----------
    k : int
    n_max : int
    table : ndarray of shape (2 n_max + 1, 2 n_max + 1)
        ``table[n1 + n_max, n2 + n_max] = kappa^{(k)}_{n1, n2}``.
    resolution : int
        Quadrature points per axis of the reported values.
    change : float
        Largest coefficient change on the last doubling of the resolution.
    """

    k: int
    n_max: int
    table: np.ndarray
    resolution: int
    change: float

    def __call__(self, n1: int, n2: int) -> complex:
        return complex(self.table[n1 + self.n_max, n2 + self.n_max])

    def truncate(self, n_max: int) -> "FourierSeriesCoeffs":
        if n_max > self.n_max:
            raise ValueError("cannot extend a truncated table")
        d = self.n_max - n_max
        return FourierSeriesCoeffs(self.k, n_max, self.table[d : d + 2 * n_max + 1, d : d + 2 * n_max + 1], self.resolution, self.change)


def _kappa_table(sl: DyadicSlice, n_max: int, M: int) -> np.ndarray:
    B = sl.half_width
    t = -B + np.arange(M) * (2.0 * B / M)
    b1, lo, hi = sl.support_box
    i1 = np.flatnonzero(np.abs(t) < b1)
    i2 = np.flatnonzero((np.abs(t) > lo) & (np.abs(t) < hi))
    vals = np.zeros((M, M), dtype=np.complex128)
    if i1.size and i2.size:
        T1, T2 = np.meshgrid(t[i1], t[i2], indexing="ij")
        vals[np.ix_(i1, i2)] = sl(T1, T2)
    K = np.fft.fft2(vals) / M ** 2
    n = np.arange(-n_max, n_max + 1)
    sign = np.where(n % 2, -1.0, 1.0)
    return K[np.ix_(n % M, n % M)] * sign[:, None] * sign[None, :]


def fourier_coefficients(
    sl: DyadicSlice,
    n_max: int,
    M: int | None = None,
    tol: float = KAPPA_TOL,
    max_resolution: int = 8192,
) -> FourierSeriesCoeffs:
    """Coefficients ``kappa^{(k)}_n`` for ``|n_1|, |n_2| <= n_max``.

    ``kappa_n`` is the mean of ``m_k(tau) exp(-i pi n . tau / B_k)`` over an
    ``M x M`` uniform grid on the box, which is the trapezoid rule for this
    periodic integrand.

    Parameters
    ----------
    sl : DyadicSlice
    n_max : int
    M : int, optional
        Fixed resolution. The table at ``2M`` is also computed, and the call
        fails if any coefficient moves by more than ``tol``. When omitted the
        resolution starts at ``max(8 (2 n_max + 1), 128)`` and doubles until the
        change is at most ``tol``.
    tol : float
    max_resolution : int

    Raises
    ------
    QuadratureResolutionError
    """
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    if M is not None:
        if M < 4 * (2 * n_max + 1):
            raise ValueError(f"M={M} is below 4(2 n_max + 1) = {4 * (2 * n_max + 1)}")
        coarse = _kappa_table(sl, n_max, M)
        fine = _kappa_table(sl, n_max, 2 * M)
        change = float(np.max(np.abs(fine - coarse)))
        if change > tol:
            raise QuadratureResolutionError(
                f"slice k={sl.k}: doubling M={M} moves kappa by {change:.3g} > {tol:g}"
            )
        return FourierSeriesCoeffs(sl.k, n_max, coarse, M, change)
    M = max(8 * (2 * n_max + 1), 128)
    coarse = _kappa_table(sl, n_max, M)
    while True:
        fine = _kappa_table(sl, n_max, 2 * M)
        change = float(np.max(np.abs(fine - coarse)))
        M *= 2
        if change <= tol:
            return FourierSeriesCoeffs(sl.k, n_max, fine, M, change)
        if M >= max_resolution:
            raise QuadratureResolutionError(
                f"slice k={sl.k}: kappa still moves by {change:.3g} at M={M}"
            )
        coarse = fine


# ---------------------------------------------------------------------------
# Decomposition
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Truncated paraproduct decomposition of a symbol.

    Attributes
    ----------
    a : int
        Shift exponent.
    k_range : (int, int)
        Inclusive scale range.
    n_max : int
    coeffs : mapping int -> ndarray
        ``coeffs[k][n1 + n_max, n2 + n_max] = kappa^{(k)}_{n1, n2}``.
    i_list : tuple of int
    symbol : TwistedSymbol or None
        Source symbol; absent for imported decompositions.
    error_budget : float or None
        Sup-norm reconstruction error over the covered region.
    resolution : mapping int -> int
        Quadrature resolution per scale.
    """

    a: int
    k_range: tuple[int, int]
    n_max: int
    coeffs: Mapping[int, np.ndarray]
    i_list: tuple[int, ...] = I_LIST
    symbol: TwistedSymbol | None = None
    error_budget: float | None = None
    resolution: Mapping[int, int] = field(default_factory=dict)

    @property
    def scales(self) -> range:
        return range(self.k_range[0], self.k_range[1] + 1)

    @property
    def term_count(self) -> int:
        return len(self.i_list) * (2 * self.n_max + 1) ** 2

    def kappa(self, k: int, n1: int, n2: int) -> complex:
        return complex(self.coeffs[k][n1 + self.n_max, n2 + self.n_max])

    def truncate(self, n_max: int, with_error: bool = True) -> "Decomposition":
        """Same coefficients restricted to ``|n_1|, |n_2| <= n_max``."""
        if n_max > self.n_max:
            raise ValueError("cannot extend a truncated decomposition")
        d = self.n_max - n_max
        coeffs = {k: t[d : d + 2 * n_max + 1, d : d + 2 * n_max + 1] for k, t in self.coeffs.items()}
        out = Decomposition(self.a, self.k_range, n_max, coeffs, self.i_list, self.symbol, None, dict(self.resolution))
        if with_error and self.symbol is not None:
            _, rep = reconstruct_symbol(out)
            object.__setattr__(out, "error_budget", rep.sup_error)
        return out


def grid_scale_range(geo: GridGeometry) -> tuple[int, int]:
    """Scales whose annuli ``2^{k-1} <= |tau_2| <= 2^{k+1}`` cover every nonzero grid frequency."""
    return math.floor(math.log2(1.0 / geo.l)), math.ceil(math.log2(geo.nyquist))


def decompose(
    m: TwistedSymbol,
    k_range: tuple[int, int],
    n_max: int,
    M: int | None = None,
    a: int | None = None,
    with_error: bool = True,
) -> Decomposition:
    """Slice ``m`` over ``k_range`` and expand every slice to order ``n_max``."""
    k_lo, k_hi = int(k_range[0]), int(k_range[1])
    if k_lo > k_hi:
        raise ValueError("empty scale range")
    coeffs: dict[int, np.ndarray] = {}
    res: dict[int, int] = {}
    sl = None
    for k in range(k_lo, k_hi + 1):
        sl = slice_symbol(m, k, a, check=(k == k_lo))
        fc = fourier_coefficients(sl, n_max, M)
        coeffs[k] = fc.table
        res[k] = fc.resolution
    assert sl is not None
    d = Decomposition(sl.a, (k_lo, k_hi), int(n_max), coeffs, I_LIST, m, None, res)
    if with_error:
        _, rep = reconstruct_symbol(d)
        object.__setattr__(d, "error_budget", rep.sup_error)
    return d


@dataclass(frozen=True)
class ReconstructionReport:
    """Sup-norm distance between a symbol and its truncated reconstruction."""

    sup_error: float | None
    argmax: tuple[float, float] | None
    samples: int


def _reconstruct(d: Decomposition, t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    shape = np.broadcast(t1, t2).shape
    t1, t2 = np.broadcast_to(t1, shape).ravel(), np.broadcast_to(t2, shape).ravel()
    n = np.arange(-d.n_max, d.n_max + 1)
    out = np.zeros(t1.shape, dtype=np.complex128)
    for k in d.scales:
        B = 2.0 ** (k + d.a + 4)
        cut_x = theta(t1 / B)
        cut_y = np.zeros_like(t2)
        for i in d.i_list:
            cut_y = cut_y + vartheta(np.ldexp(t2, -(k + i)))
        live = (cut_x != 0) & (cut_y != 0)
        if not np.any(live):
            continue
        e1 = np.exp(1j * math.pi * np.outer(t1[live], n) / B)
        e2 = np.exp(1j * math.pi * np.outer(t2[live], n) / B)
        series = np.einsum("pa,ab,pb->p", e1, d.coeffs[k], e2, optimize=True)
        out[live] += cut_x[live] * cut_y[live] * series
    return out.reshape(shape)


def _error_sample(d: Decomposition, n_scale: int = 129, n_ratio: int = 129) -> tuple[np.ndarray, np.ndarray]:
    u = np.linspace(d.k_range[0], d.k_range[1], n_scale)
    r = np.linspace(-(2.0 ** (d.a + 1)), 2.0 ** (d.a + 1), n_ratio)
    mag = 2.0 ** u
    t2 = np.concatenate([mag, -mag])
    T2, R = np.meshgrid(t2, r, indexing="ij")
    return (R * np.abs(T2)).ravel(), T2.ravel()


def reconstruct_symbol(d: Decomposition) -> tuple[TwistedSymbol, ReconstructionReport]:
    """Evaluator of the truncated triple sum and its sup error against ``d.symbol``.

    The error is sampled on ``2^{k_min} <= |tau_2| <= 2^{k_max}`` (log-spaced)
    and ``|tau_1| <= 2^{a+1} |tau_2|``, which contains the symbol's support.
    """
    rec = TwistedSymbol(lambda t1, t2: _reconstruct(d, t1, t2), name="reconstruction")
    if d.symbol is None:
        return rec, ReconstructionReport(None, None, 0)
    t1, t2 = _error_sample(d)
    err = np.abs(d.symbol(t1, t2) - _reconstruct(d, t1, t2))
    j = int(np.argmax(err))
    return rec, ReconstructionReport(float(err[j]), (float(t1[j]), float(t2[j])), int(t1.size))


def synthesize_paraproducts(d: Decomposition) -> list[ParaproductSpec]:
    """One paraproduct per ``(i, n_1, n_2)`` with ``lambda_k = kappa^{(k)}_{n_1, n_2}``.

    Profiles are ``phi^{(n_1)}`` and ``psi^{(n_2, i)}`` from :func:`make_modulated`.
    """
    specs = []
    phis = {n1: make_modulated(n1, a=d.a) for n1 in range(-d.n_max, d.n_max + 1)}
    for i in d.i_list:
        for n2 in range(-d.n_max, d.n_max + 1):
            psi = make_modulated(n2, i=i, a=d.a)
            for n1 in range(-d.n_max, d.n_max + 1):
                lam = {k: d.kappa(k, n1, n2) for k in d.scales}
                specs.append(ParaproductSpec(phis[n1], psi, lam))
    return specs


def apply_decomposed(d: Decomposition, f: GridFunction2D, g: GridFunction2D) -> GridFunction2D:
    """Sum of all synthesized paraproducts applied to ``(f, g)``.

    Every filtered ``P^{phi^{(n_1)}_k}_x f`` and ``P^{psi^{(n_2, i)}_k}_y g`` is
    computed once per scale and combined with the coefficient table, which is
    the same finite sum as calling ``apply_paraproduct`` on every spec.
    """
    geo = _check_pair(f, g)
    fr = geo.freqs
    n = np.arange(-d.n_max, d.n_max + 1)
    fx = np.fft.fft(f.values, axis=0)
    gy = np.fft.fft(g.values, axis=1)
    out = np.zeros((geo.n, geo.n), dtype=np.complex128)
    for k in d.scales:
        xk = np.ldexp(fr, -k)
        mod = np.exp(1j * math.pi * np.outer(n, xk) * 2.0 ** (-d.a - 4))  # (n, freq)
        fil_x = theta(xk * 2.0 ** (-d.a - 4)) * geo.keep
        pf = np.fft.ifft(fx[None, :, :] * (mod * fil_x)[:, :, None], axis=1)  # (n1, x, y)
        comb = np.zeros((len(n), geo.n, geo.n), dtype=np.complex128)  # (n1, x, y)
        for i in d.i_list:
            fil_y = vartheta(np.ldexp(xk, -i)) * geo.keep
            if not np.any(fil_y):
                continue
            pg = np.fft.ifft(gy[None, :, :] * (mod * fil_y)[:, None, :], axis=2)  # (n2, x, y)
            comb += np.einsum("ab,bxy->axy", d.coeffs[k], pg, optimize=True)
        out += np.einsum("axy,axy->xy", pf, comb)
    return GridFunction2D(geo, out)


@dataclass(frozen=True)
class DecayReport:
    """Weighted coefficient decay ``max_{|n_1|+|n_2|=R} |kappa| (1+R)^10``.

    Attributes
    ----------
    radii : ndarray
    weighted : ndarray
        The sequence, maximized over scales as well when several are given.
    median : float
    flagged : bool
        Whether some entry exceeds twice the median.
    """

    radii: np.ndarray
    weighted: np.ndarray
    median: float
    flagged: bool

    @property
    def growth(self) -> float:
        return float(self.weighted.max() / self.median) if self.median > 0 else 0.0


def decay_report(
    coeffs: FourierSeriesCoeffs | Decomposition | np.ndarray, r_max: int | None = None, power: int = 10
) -> DecayReport:
    """Tabulate the weighted decay of ``kappa`` over shells ``|n_1| + |n_2| = R``.

    ``R`` runs over ``0..r_max`` with ``r_max = 2 n_max`` by default.
    """
    if isinstance(coeffs, Decomposition):
        tables = list(coeffs.coeffs.values())
    elif isinstance(coeffs, FourierSeriesCoeffs):
        tables = [coeffs.table]
    else:
        tables = [np.asarray(coeffs)]
    n_max = (tables[0].shape[0] - 1) // 2
    if r_max is None:
        r_max = 2 * n_max
    n = np.arange(-n_max, n_max + 1)
    shell = np.abs(n)[:, None] + np.abs(n)[None, :]
    mag = np.max(np.abs(np.stack(tables)), axis=0)
    radii = np.arange(r_max + 1)
    weighted = np.array(
        [(mag[shell == R].max() if np.any(shell == R) else 0.0) * (1.0 + R) ** power for R in radii]
    )
    med = float(np.median(weighted))
    return DecayReport(radii, weighted, med, bool(np.any(weighted > 2.0 * med)))


# ---------------------------------------------------------------------------
# JSON export
# ---------------------------------------------------------------------------


def export_decomposition(d: Decomposition, path: str | Path | None = None) -> dict:
    """JSON document ``{a, k_range, n_max, i_list, coeffs, error_budget}``."""
    rows = []
    for k in d.scales:
        t = d.coeffs[k]
        for n1 in range(-d.n_max, d.n_max + 1):
            for n2 in range(-d.n_max, d.n_max + 1):
                v = t[n1 + d.n_max, n2 + d.n_max]
                rows.append({"k": k, "n1": n1, "n2": n2, "re": float(v.real), "im": float(v.imag)})
    doc = {
        "a": d.a,
        "k_range": list(d.k_range),
        "n_max": d.n_max,
        "i_list": list(d.i_list),
        "coeffs": rows,
        "error_budget": d.error_budget,
    }
    if path is not None:
        Path(path).write_text(json.dumps(doc))
    return doc


def import_decomposition(source: str | Path | Mapping) -> Decomposition:
    """Rebuild a :class:`Decomposition` from :func:`export_decomposition` output."""
    doc = source if isinstance(source, Mapping) else json.loads(Path(source).read_text())
    try:
        a = int(doc["a"])
        k_lo, k_hi = (int(v) for v in doc["k_range"])
        n_max = int(doc["n_max"])
        i_list = tuple(int(i) for i in doc["i_list"])
        coeffs = {k: np.zeros((2 * n_max + 1, 2 * n_max + 1), dtype=np.complex128) for k in range(k_lo, k_hi + 1)}
        for row in doc["coeffs"]:
            if max(abs(int(row["n1"])), abs(int(row["n2"]))) > n_max:
                raise ValueError("coefficient index beyond n_max")
            coeffs[int(row["k"])][int(row["n1"]) + n_max, int(row["n2"]) + n_max] = complex(row["re"], row["im"])
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ValueError(f"malformed decomposition document: {exc}") from exc
    budget = doc.get("error_budget")
    return Decomposition(a, (k_lo, k_hi), n_max, coeffs, i_list, None, None if budget is None else float(budget))
