"""Numerical experiments on the Sobolev estimates, their necessity and symbol recovery."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from ..decompose import Decomposition, apply_decomposed
from ..grid import (
    Generator,
    GridFunction2D,
    GridGeometry,
    band_limited_random,
    dilate_generator,
    lemma_phi,
    lemma_psi,
    lp_norm,
    mixed_sobolev_norm,
    partial_derivative,
    sample,
    sobolev_norm,
    wave_packet,
)
from ..operators import (
    ParaproductSpec,
    SpatialSymbol,
    TwistedSymbol,
    apply_paraproduct,
    apply_spatial_multiplier,
    apply_symbol,
    partial_convolution,
)
from .config import ExponentTuple, GateResult, exponent_gate

__all__ = [
    "HypothesisViolationError",
    "NyquistViolationError",
    "TrialRow",
    "RatioReport",
    "RecoveryRow",
    "RecoveryReport",
    "ProbeRow",
    "ProbeReport",
    "LeibnizResult",
    "ratio_sweep",
    "lemma_pairing",
    "recover_symbol",
    "prop1_probe",
    "leibniz_check",
    "random_pairs",
]

Operator = Union[TwistedSymbol, SpatialSymbol, Decomposition, Callable[[GridFunction2D, GridFunction2D], GridFunction2D]]

#: ratios below this are treated as numerical zeros when fitting growth exponents
RATIO_FLOOR = 1e-12
PROBE_LABEL = "outside Theorem 2 hypotheses"


class HypothesisViolationError(ValueError):
    """Exponents or symbol violate the estimate's hypotheses outside probe mode."""


class NyquistViolationError(ValueError):
    """Requested frequencies do not fit under the grid's Nyquist frequency."""


def _as_operator(op: Operator) -> Callable[[GridFunction2D, GridFunction2D], GridFunction2D]:
    if isinstance(op, TwistedSymbol):
        return lambda f, g: apply_symbol(op, f, g)
    if isinstance(op, SpatialSymbol):
        return lambda f, g: apply_spatial_multiplier(op, f, g)
    if isinstance(op, Decomposition):
        return lambda f, g: apply_decomposed(op, f, g)
    if callable(op):
        return op
    raise TypeError(f"cannot apply {type(op).__name__} as a bilinear operator")


def _check_hypotheses(op: Operator, exps: ExponentTuple, geo: GridGeometry, probe: bool) -> GateResult:
    gate = exponent_gate(exps)
    if probe:
        return gate
    if not gate.valid:
        raise HypothesisViolationError(f"exponent gate: {gate.reason}")
    if isinstance(op, TwistedSymbol):
        if op.support_constant is None:
            raise HypothesisViolationError(f"symbol {op.name} has no support constant")
        op.check_support()
    elif isinstance(op, SpatialSymbol):
        if op.support_constant is None:
            raise HypothesisViolationError(f"symbol {op.name} has no support constant")
        op.check_support(geo)
    return gate


def _ratio(out: GridFunction2D, f: GridFunction2D, g: GridFunction2D, e: ExponentTuple) -> tuple[float, float, float, float]:
    n_out = mixed_sobolev_norm(out, e.s, e.r)
    n_f = lp_norm(f, e.p)
    n_g = sobolev_norm(g, e.s, e.q)
    den = n_f * n_g
    return (n_out / den if den > 0 else 0.0), n_out, n_f, n_g


# ---------------------------------------------------------------------------
# Ratio sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrialRow:
    trial_id: int
    a_dilation: int
    ratio: float
    norm_out: float
    norm_f: float
    norm_g: float
    flags: str = ""


@dataclass
class RatioReport:
    """Per-trial ratios ``||T(f,g)||_{L^r_y W^{s,r}_x} / (||f||_p ||g||_{W^{s,q}})``."""

    rows: list[TrialRow]
    exponents: ExponentTuple
    gate: GateResult
    probe: bool
    warnings: list[str] = field(default_factory=list)

    @property
    def ratios(self) -> np.ndarray:
        return np.array([r.ratio for r in self.rows])

    @property
    def all_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.ratios)))

    @property
    def sup(self) -> float:
        return float(self.ratios.max()) if self.rows else 0.0

    @property
    def spread(self) -> float:
        """``max / min`` over positive ratios (``inf`` if some ratio is zero)."""
        r = self.ratios
        if r.size == 0 or np.all(r == 0):
            return 1.0
        return float(r.max() / r.min()) if r.min() > 0 else math.inf

    def summary(self) -> dict:
        r = self.ratios
        return {
            "trials": len(self.rows),
            "sup_ratio": self.sup,
            "min_ratio": float(r.min()) if r.size else 0.0,
            "max_over_min": self.spread,
            "all_finite": self.all_finite,
            "gate": {"valid": self.gate.valid, "reason": self.gate.reason},
            "probe": self.probe,
            "label": PROBE_LABEL if self.probe else "",
            "warnings": self.warnings,
        }


def random_pairs(
    geo: GridGeometry, count: int, seed: int, annulus: Sequence[float], x_step: int = 1
) -> list[tuple[Generator, Generator]]:
    """``count`` independent pairs of band-limited random generators."""
    states = np.random.SeedSequence(int(seed)).generate_state(2 * count) if count else []
    return [
        (
            band_limited_random(geo, annulus, int(states[2 * t]), x_step),
            band_limited_random(geo, annulus, int(states[2 * t + 1]), x_step),
        )
        for t in range(count)
    ]


def ratio_sweep(
    op: Operator,
    geo: GridGeometry,
    exps: ExponentTuple,
    inputs: Sequence[tuple[Generator, Generator]],
    dilations: Sequence[int] = (0,),
    probe: bool = False,
    workers: int = 1,
) -> RatioReport:
    """Bound ratios over an ensemble of input pairs and dilations ``D_a``.

    Both inputs are dilated at generator level before sampling. Rows are ordered
    by trial and then by dilation regardless of ``workers``.

    Raises
    ------
    HypothesisViolationError
        Outside probe mode, when the exponent gate fails or the symbol has no
        valid support constant.
    """
    gate = _check_hypotheses(op, exps, geo, probe)
    apply = _as_operator(op)
    tasks = [(t, int(a)) for t in range(len(inputs)) for a in dilations]

    def run(task: tuple[int, int]) -> TrialRow:
        t, a = task
        fg, gg = inputs[t]
        f = sample(dilate_generator(fg, a), geo)
        g = sample(dilate_generator(gg, a), geo)
        ratio, n_out, n_f, n_g = _ratio(apply(f, g), f, g, exps)
        flags = []
        if n_f * n_g == 0:
            flags.append("zero-input")
        if not math.isfinite(ratio):
            flags.append("non-finite")
        if probe:
            flags.append("probe")
        return TrialRow(t, a, ratio, n_out, n_f, n_g, ";".join(flags))

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(run, tasks))
        else:
            rows = [run(task) for task in tasks]
    messages = sorted({str(w.message) for w in caught})
    return RatioReport(rows, exps, gate, probe, messages)


# ---------------------------------------------------------------------------
# Symbol recovery
# ---------------------------------------------------------------------------


def lemma_pairing(
    op: Operator, f: GridFunction2D, g: GridFunction2D, h: GridFunction2D
) -> complex:
    """Hermitian pairing ``(L/N)^2 sum T(f, g) conj(h)``."""
    u = _as_operator(op)(f, g)
    return complex(np.sum(u.values * np.conj(h.values)) * u.geometry.dx ** 2)


@dataclass(frozen=True)
class RecoveryRow:
    eps: float
    value: complex
    abs_error: float
    rel_error: float


@dataclass
class RecoveryReport:
    """Pairing values along the ``eps`` schedule and their errors against the symbol value."""

    rows: list[RecoveryRow]
    target: complex
    xi0: tuple[float, float]
    eta0: tuple[float, float]
    converged: bool

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.abs_error for r in self.rows])

    @property
    def rel_errors(self) -> np.ndarray:
        return np.array([r.rel_error for r in self.rows])

    @property
    def strictly_decreasing(self) -> bool:
        e = self.errors
        return bool(np.all(np.diff(e) < 0))

    def summary(self) -> dict:
        return {
            "target_re": self.target.real,
            "target_im": self.target.imag,
            "xi0": list(self.xi0),
            "eta0": list(self.eta0),
            "converged": self.converged,
            "strictly_decreasing": self.strictly_decreasing,
            "final_rel_error": float(self.rel_errors[-1]) if self.rows else None,
        }


def _check_band(freq: Sequence[float], reach: float, geo: GridGeometry, what: str) -> None:
    for v in freq:
        if abs(v) + reach > geo.nyquist * (1 + 1e-12):
            raise NyquistViolationError(
                f"{what} component {v:g} with spectral reach {reach:g} exceeds Nyquist {geo.nyquist:g}"
            )


def recover_symbol(
    op: TwistedSymbol | Operator,
    xi0: Sequence[float],
    eta0: Sequence[float],
    eps_schedule: Sequence[float] = (0.5, 0.25, 0.125),
    geo: GridGeometry = GridGeometry(64, 32.0),
    center: Sequence[float] | None = None,
    target: complex | None = None,
) -> RecoveryReport:
    """Read ``m(xi0_1, eta0_2)`` off the pairing ``<T(f_eps, g_eps), h_eps>``.

    ``f_eps`` and ``g_eps`` are ``lemma_phi`` wave packets with carriers ``xi0``
    and ``eta0``; ``h_eps = eps^2 * lemma_psi`` with carrier ``xi0 + eta0``.

    Raises
    ------
    NyquistViolationError
        If some spectrum at some ``eps`` reaches beyond Nyquist.
    """
    xi0 = (float(xi0[0]), float(xi0[1]))
    eta0 = (float(eta0[0]), float(eta0[1]))
    zeta0 = (xi0[0] + eta0[0], xi0[1] + eta0[1])
    if center is None:
        center = (geo.l / 2.0, geo.l / 2.0)
    center = (float(center[0]), float(center[1]))
    if target is None:
        if not isinstance(op, TwistedSymbol):
            raise ValueError("target value required for non-symbol operators")
        target = complex(op(xi0[0], eta0[1]))
    rows = []
    for eps in eps_schedule:
        eps = float(eps)
        _check_band(xi0, eps, geo, "xi0")
        _check_band(eta0, eps, geo, "eta0")
        _check_band(zeta0, 2 * eps, geo, "xi0 + eta0")
        f = sample(lemma_phi(center, xi0, eps), geo)
        g = sample(lemma_phi(center, eta0, eps), geo)
        h = sample(lemma_psi(center, zeta0, eps), geo) * (eps ** 2)
        val = lemma_pairing(op, f, g, h)
        err = abs(val - target)
        rel = err / abs(target) if target != 0 else err
        rows.append(RecoveryRow(eps, val, err, rel))
    errs = np.array([r.abs_error for r in rows])
    atol = 1e-10 * max(1.0, abs(target))
    converged = bool(np.all((np.diff(errs) < 0) | (errs[1:] <= atol))) if len(rows) > 1 else True
    return RecoveryReport(rows, target, xi0, eta0, converged)


# ---------------------------------------------------------------------------
# necessity probe
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbeRow:
    lam: float
    ratio: float
    norm_out: float
    norm_f: float
    norm_g: float
    nu: float
    flags: str = ""


@dataclass
class ProbeReport:
    """Ratios along the carrier sweep and the fitted growth exponent."""

    rows: list[ProbeRow]
    exponent: float | None
    exponents: ExponentTuple
    gate: GateResult
    dropped: list[float]
    label: str = PROBE_LABEL

    def summary(self) -> dict:
        return {
            "exponent": self.exponent,
            "gate": {"valid": self.gate.valid, "reason": self.gate.reason},
            "dropped_lambdas": self.dropped,
            "label": self.label,
        }


def prop1_probe(
    m: TwistedSymbol,
    exps: ExponentTuple,
    lambdas: Sequence[float] = (4.0, 8.0, 16.0),
    geo: GridGeometry = GridGeometry(256, 4.0),
    eta2: float = 1.0,
    width: float = 0.3,
    probe: bool = True,
) -> ProbeReport:
    """Growth of the bound ratio as the carrier ``lambda`` of ``f`` increases.

    ``f`` is a Gaussian wave packet with carrier ``(lambda, 0)`` and ``g`` one with
    carrier ``(0, eta2)``; both have standard deviation ``width``. The growth
    exponent is the least-squares slope of ``log ratio`` against ``log lambda``,
    with ratios clipped below at ``RATIO_FLOOR``. The proof's diagnostic symbol
    ``nu`` is recorded at the carrier pair. Carriers whose packets reach within
    eight spectral standard deviations of Nyquist are dropped.
    """
    gate = _check_hypotheses(m, exps, geo, probe)
    spread = 8.0 / (2.0 * math.pi * width)
    c = (geo.l / 2.0, geo.l / 2.0)
    g = sample(wave_packet(c, width, (0.0, eta2)), geo)
    rows: list[ProbeRow] = []
    dropped: list[float] = []
    for lam in lambdas:
        lam = float(lam)
        if lam + spread >= geo.nyquist or abs(eta2) + spread >= geo.nyquist:
            dropped.append(lam)
            continue
        f = sample(wave_packet(c, width, (lam, 0.0)), geo)
        ratio, n_out, n_f, n_g = _ratio(apply_symbol(m, f, g), f, g, exps)
        w = 4.0 * math.pi ** 2
        nu = abs(complex(m(lam, eta2))) * ((1.0 + w * lam ** 2) / (1.0 + w * eta2 ** 2)) ** (exps.s / 2.0)
        flags = "probe" if probe else ""
        if ratio < RATIO_FLOOR:
            flags = (flags + ";below-floor").lstrip(";")
        rows.append(ProbeRow(lam, ratio, n_out, n_f, n_g, nu, flags))
    exponent = None
    if len(rows) >= 2:
        x = np.log([r.lam for r in rows])
        y = np.log([max(r.ratio, RATIO_FLOOR) for r in rows])
        exponent = float(np.polyfit(x, y, 1)[0])
    return ProbeReport(rows, exponent, exps, gate, dropped, PROBE_LABEL if probe else "")


# ---------------------------------------------------------------------------
# Leibniz check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LeibnizResult:
    order: int
    rel_error: float
    lhs_norm: float


def leibniz_check(spec: ParaproductSpec, f: GridFunction2D, g: GridFunction2D, s: int) -> LeibnizResult:
    """Compare ``d_x^s`` of a paraproduct with its product-rule expansion.

    The right side is ``sum_beta C(s, beta) sum_k lambda_k d_x^beta P^{phi_k}_x f *
    P^{psi_k}_y d_x^{s-beta} g``. Both sides agree exactly on the grid when the
    x-spectra of the two factors sum to less than Nyquist.
    """
    if s not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    lhs = partial_derivative(apply_paraproduct(spec, f, g), "x", s)
    rhs = np.zeros_like(lhs.values)
    for beta in range(s + 1):
        dg = partial_derivative(g, "x", s - beta)
        for k, lam in spec.lambdas.items():
            if lam == 0:
                continue
            pf = partial_derivative(partial_convolution(f, "x", spec.phi, k), "x", beta)
            pg = partial_convolution(dg, "y", spec.psi, k)
            rhs += math.comb(s, beta) * lam * pf.values * pg.values
    n_l = float(np.linalg.norm(lhs.values))
    diff = float(np.linalg.norm(lhs.values - rhs))
    return LeibnizResult(s, diff / n_l if n_l > 0 else diff, n_l)

