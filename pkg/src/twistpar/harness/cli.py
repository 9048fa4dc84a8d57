"""Command-line entry point ``twistpar``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from ..cutoffs import SeminormConvergenceError, annular_profile, bump_profile, make_vartheta, partition_check
from ..decompose import (
    QuadratureResolutionError,
    apply_decomposed,
    decay_report,
    decompose,
    export_decomposition,
    grid_scale_range,
    import_decomposition,
    reconstruct_symbol,
)
from ..grid import GfnFormatError, SupportViolationError, read_gfn, sample, write_gfn
from ..operators import (
    ParaproductSpec,
    SpatialSymbol,
    TwistedSymbol,
    apply_spatial_multiplier,
    apply_symbol,
    default_scale_range,
)
from .config import ConfigError, ExperimentConfig, build_symbol, resolve_config
from .experiments import (
    HypothesisViolationError,
    NyquistViolationError,
    leibniz_check,
    prop1_probe,
    random_pairs,
    ratio_sweep,
    recover_symbol,
)
from .report import RATIO_COLUMNS, write_report

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_CONFIG", "EXIT_HYPOTHESIS", "EXIT_NUMERICAL"]

log = logging.getLogger("twistpar")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_NUMERICAL = 4

PARTITION_TOL = 1e-12
LEIBNIZ_TOL = 1e-8


class NonConvergenceError(RuntimeError):
    """A numerical check did not meet its tolerance; ``payload`` is still reported."""

    def __init__(self, message: str, payload: tuple | None = None) -> None:
        super().__init__(message)
        self.payload = payload


def _grid_arg(text: str) -> tuple[int, float]:
    try:
        n, l = text.split(",")
        return int(n), float(l)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected N,L but got {text!r}") from exc


def _seed_arg(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _twisted(cfg: ExperimentConfig) -> TwistedSymbol:
    m = build_symbol(cfg.section("symbol"), cfg.grid)
    if not isinstance(m, TwistedSymbol):
        raise ConfigError(f"{cfg.command} needs a symbol of the frequency variables only")
    return m


# ---------------------------------------------------------------------------
# Commands. Each returns (summary, rows, columns).
# ---------------------------------------------------------------------------


def cmd_partition_check(cfg: ExperimentConfig, out: Path) -> tuple[dict, list[dict], Sequence[str]]:
    sec = cfg.section("partition")
    k_min, k_max, samples = int(sec["k_min"]), int(sec["k_max"]), int(sec["samples"])
    rng = np.random.default_rng(cfg.seed)
    mags = 2.0 ** rng.uniform(k_min, k_max, samples)
    taus = mags * rng.choice([-1.0, 1.0], samples)
    rep = partition_check(make_vartheta(), k_min, k_max, taus)
    summary = {
        "max_deviation": rep.max_deviation,
        "valid_count": rep.valid_count,
        "tolerance": PARTITION_TOL,
        "pass": rep.max_deviation <= PARTITION_TOL,
    }
    rows = [{"k_min": k_min, "k_max": k_max, "samples": samples, "max_deviation": rep.max_deviation}]
    columns = ("k_min", "k_max", "samples", "max_deviation")
    if not summary["pass"]:
        raise NonConvergenceError(
            f"partition deviation {rep.max_deviation:.3g} exceeds {PARTITION_TOL:g}", (summary, rows, columns)
        )
    return summary, rows, columns


def cmd_decompose(cfg: ExperimentConfig, out: Path) -> tuple[dict, list[dict], Sequence[str]]:
    m = _twisted(cfg)
    sec = cfg.section("decomposition")
    k_range = tuple(sec["k_range"]) if sec.get("k_range") else grid_scale_range(cfg.grid)
    d = decompose(m, k_range, int(sec["n_max"]))
    out.mkdir(parents=True, exist_ok=True)
    export_decomposition(d, out / "decomposition.json")
    dec = decay_report(d)
    rows = [{"R": int(R), "weighted": float(w)} for R, w in zip(dec.radii, dec.weighted)]
    summary = {
        "a": d.a,
        "k_range": list(d.k_range),
        "n_max": d.n_max,
        "term_count": d.term_count,
        "error_budget": d.error_budget,
        "decay_median": dec.median,
        "decay_flagged": dec.flagged,
        "resolution": {str(k): v for k, v in d.resolution.items()},
    }
    return summary, rows, ("R", "weighted")


def cmd_reconstruct_error(cfg: ExperimentConfig, out: Path) -> tuple[dict, list[dict], Sequence[str]]:
    m = _twisted(cfg)
    sec = cfg.section("decomposition")
    n_list = sorted(int(n) for n in sec["n_max_list"])
    k_range = tuple(sec["k_range"]) if sec.get("k_range") else grid_scale_range(cfg.grid)
    full = decompose(m, k_range, n_list[-1], with_error=False)
    rows = []
    for n in n_list:
        _, rep = reconstruct_symbol(full.truncate(n, with_error=False))
        rows.append({"n_max": n, "sup_error": rep.sup_error})
    errs = [r["sup_error"] for r in rows]
    summary = {
        "k_range": list(full.k_range),
        "strictly_decreasing": all(b < a for a, b in zip(errs, errs[1:])),
    }
    return summary, rows, ("n_max", "sup_error")


def cmd_apply(cfg: ExperimentConfig, out: Path) -> tuple[dict, list[dict], Sequence[str]]:
    sec = cfg.section("inputs")
    if not sec.get("f") or not sec.get("g"):
        raise ConfigError("apply needs inputs.f and inputs.g (.gfn paths)")
    f, g = read_gfn(sec["f"]), read_gfn(sec["g"])
    if sec.get("decomposition"):
        u = apply_decomposed(import_decomposition(sec["decomposition"]), f, g)
        route = "decomposition"
    else:
        op = build_symbol(cfg.section("symbol"), f.geometry)
        if isinstance(op, SpatialSymbol):
            u = apply_spatial_multiplier(op, f, g)
        else:
            u = apply_symbol(op, f, g)
        route = "symbol"
    out.mkdir(parents=True, exist_ok=True)
    write_gfn(out / "output.gfn", u)
    summary = {"route": route, "output": "output.gfn", "l2_norm": float(np.sqrt(np.sum(np.abs(u.values) ** 2)) * u.geometry.dx)}
    return summary, [], ()


def cmd_ratio_sweep(cfg: ExperimentConfig, out: Path) -> tuple[dict, list[dict], Sequence[str]]:
    geo = cfg.grid
    op = build_symbol(cfg.section("symbol"), geo)
    ens = cfg.section("ensemble")
    if ens.get("kind", "band_limited_random") != "band_limited_random":
        raise ConfigError(f"unsupported ensemble kind {ens['kind']!r}")
    dil = [int(a) for a in cfg.section("sweep").get("dilations", [0])]
    x_step = ens.get("x_step")
    if x_step is None:
        x_step = 2 ** max(0, max(dil, default=0))
    pairs = random_pairs(geo, int(ens["count"]), cfg.seed, ens["annulus"], int(x_step))
    rep = ratio_sweep(op, geo, cfg.exponents, pairs, dil, cfg.probe, int(cfg.data.get("workers", 1)))
    rows = [dict(r.__dict__) for r in rep.rows]
    return rep.summary(), rows, RATIO_COLUMNS


def cmd_recover_symbol(cfg: ExperimentConfig, out: Path) -> tuple[dict, list[dict], Sequence[str]]:
    sec = cfg.section("recovery")
    rep = recover_symbol(_twisted(cfg), sec["xi0"], sec["eta0"], sec["eps"], cfg.grid, sec.get("center"))
    rows = [
        {"eps": r.eps, "value_re": r.value.real, "value_im": r.value.imag, "abs_error": r.abs_error, "rel_error": r.rel_error}
        for r in rep.rows
    ]
    columns = ("eps", "value_re", "value_im", "abs_error", "rel_error")
    if not rep.converged:
        raise NonConvergenceError(
            "recovery errors did not decrease along the eps schedule", (rep.summary(), rows, columns)
        )
    return rep.summary(), rows, columns


def cmd_prop1_probe(cfg: ExperimentConfig, out: Path) -> tuple[dict, list[dict], Sequence[str]]:
    sec = cfg.section("sweep")
    rep = prop1_probe(
        _twisted(cfg), cfg.exponents, sec["lambdas"], cfg.grid, float(sec["eta2"]), float(sec["width"]), cfg.probe
    )
    rows = [dict(r.__dict__) for r in rep.rows]
    return rep.summary(), rows, ("lam", "ratio", "norm_out", "norm_f", "norm_g", "nu", "flags")


def cmd_leibniz_check(cfg: ExperimentConfig, out: Path) -> tuple[dict, list[dict], Sequence[str]]:
    geo = cfg.grid
    sec = cfg.section("leibniz")
    ens = cfg.section("ensemble")
    k_lo, k_hi = sec["k_range"] if sec.get("k_range") else default_scale_range(geo)
    spec = ParaproductSpec(bump_profile(1.0), annular_profile(1.0), {k: 1.0 for k in range(k_lo, k_hi + 1)})
    rows = []
    for t, (fg, gg) in enumerate(random_pairs(geo, int(ens["count"]), cfg.seed, ens["annulus"])):
        f, g = sample(fg, geo), sample(gg, geo)
        for s in sec["orders"]:
            res = leibniz_check(spec, f, g, int(s))
            rows.append({"trial_id": t, "order": res.order, "rel_error": res.rel_error, "lhs_norm": res.lhs_norm})
    worst = max((r["rel_error"] for r in rows), default=0.0)
    summary = {"k_range": [k_lo, k_hi], "max_rel_error": worst, "tolerance": LEIBNIZ_TOL}
    columns = ("trial_id", "order", "rel_error", "lhs_norm")
    if worst > LEIBNIZ_TOL:
        raise NonConvergenceError(
            f"Leibniz relative error {worst:.3g} exceeds {LEIBNIZ_TOL:g}", (summary, rows, columns)
        )
    return summary, rows, columns


COMMANDS: dict[str, Callable[[ExperimentConfig, Path], tuple[dict, list[dict], Sequence[str]]]] = {
    "partition-check": cmd_partition_check,
    "decompose": cmd_decompose,
    "reconstruct-error": cmd_reconstruct_error,
    "apply": cmd_apply,
    "ratio-sweep": cmd_ratio_sweep,
    "recover-symbol": cmd_recover_symbol,
    "prop1-probe": cmd_prop1_probe,
    "leibniz-check": cmd_leibniz_check,
}


HELP = {
    "partition-check": "verify the dyadic partition of unity on random samples",
    "decompose": "compute paraproduct coefficients and export the decomposition",
    "reconstruct-error": "symbol reconstruction error as n_max grows",
    "apply": "apply a symbol or stored decomposition to two .gfn inputs",
    "ratio-sweep": "boundedness ratios over a seeded ensemble and dilations",
    "recover-symbol": "recover the symbol at a point from shrinking wave packets",
    "prop1-probe": "growth of the ratio along high-frequency carriers",
    "leibniz-check": "compare a derivative of a paraproduct with its Leibniz expansion",
}


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # subcommands repeat the flags with suppressed defaults so they do not clobber
    # values given before the subcommand name
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", type=Path, default=d(None), help="JSON document overriding the defaults")
    parser.add_argument("--out", type=Path, default=d(Path(".")), help="output directory (default: cwd)")
    parser.add_argument("--seed", type=_seed_arg, default=d(None), help="ensemble seed")
    parser.add_argument("--grid", type=_grid_arg, default=d(None), metavar="N,L", help="grid size and box length")
    parser.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twistpar", description="Twisted paraproduct experiments.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=HELP[name])
        _global_flags(sp, suppress=True)
    return parser


def _load_user(path: Path | None) -> dict[str, Any] | None:
    if path is None:
        return None
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args.command, _load_user(args.config), args.seed, args.grid)
        summary, rows, columns = COMMANDS[args.command](cfg, args.out)
    except (ConfigError, GfnFormatError, NyquistViolationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HypothesisViolationError, SupportViolationError) as exc:
        print(f"hypothesis violation: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except NonConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        if exc.payload is not None:
            write_report(args.out, cfg, *exc.payload)
        return EXIT_NUMERICAL
    except (QuadratureResolutionError, SeminormConvergenceError) as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    jpath, _ = write_report(args.out, cfg, summary, rows, columns)
    log.info("wrote %s", jpath)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
