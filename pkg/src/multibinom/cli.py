"""Command-line front end.

    python -m multibinom price    --config run.json [--method auto] [--nodes root] [--threads 1]
    python -m multibinom certify  --config run.json
    python -m multibinom vertices --config run.json

The config is one JSON document::

    {
      "market": {"growth_factor": 1.02, "num_steps": 2,
                 "assets": [{"initial_price": 100, "up_ratio": 1.2, "down_ratio": 0.8}, ...]},
      "payoff": {"kind": "basket_call", "weights": [0.5, 0.5], "strike": 100},
      "method": "auto", "nodes": "root", "tolerance": 1e-9,
      "budgets": {"max_scenario_bits": 24, "max_fibre_bits": 22, "max_terms": 4194304,
                  "max_vertices": 100000, "max_seconds": 60}
    }

Table payoffs give ``"values"`` inline or ``"csv"``, a path relative to the
config file (see ``load_table``).  Results go to stdout as CSV; diagnostics go
to stderr.  Exit codes: 0 success, 1 config error, 2 certification failure,
3 budget exceeded.  Output is assembled in memory and written only on success.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BudgetExceeded, MassOverflow, PricingError
from .linprog import enumerate_vertices
from .market_core import MarketParams
from .measures import martingale_constraints
from .payoffs import Certificate, Certification, Kind, PayoffFn, certify
from .pricer import (
    BoundsSurface,
    backward_induction_bounds,
    closed_form_surface,
    lower_product_available,
    vertex_measure,
)
from .supermodular import column_to_mask

EXIT_OK, EXIT_CONFIG, EXIT_CERTIFICATE, EXIT_BUDGET = 0, 1, 2, 3
METHODS = ("lp", "closed", "both", "auto")
NODE_SETS = ("root", "all")


class ConfigError(Exception):
    pass


class CertificationFailure(Exception):
    pass


@dataclass(frozen=True)
class Budgets:
    max_scenario_bits: int = 24
    max_fibre_bits: int = 22
    max_terms: int = 1 << 22
    max_vertices: int = 100_000
    max_seconds: float = 60.0


@dataclass(frozen=True)
class RunConfig:
    market: MarketParams
    payoff: PayoffFn | None
    method: str = "auto"
    nodes: str = "root"
    tolerance: float = 1e-9
    budgets: Budgets = field(default_factory=Budgets)


def load_table(path: Path, kind: Kind, params: MarketParams) -> np.ndarray:
    """Read a table payoff from CSV.

    A ``value`` column is required.  Rows are keyed by ``up_counts`` (dash
    joined, terminal tables) or ``scenario`` (dash-joined 1-based column
    labels, path tables) when that column is present, otherwise they are taken
    in canonical order.
    """
    m, n = params.num_assets, params.num_steps
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "value" not in rows[0]:
        raise ConfigError(f"{path}: expected a 'value' column")
    key = "up_counts" if kind is Kind.TABLE_TERMINAL else "scenario"
    size = (n + 1) ** m if kind is Kind.TABLE_TERMINAL else (1 << m) ** n
    if len(rows) != size:
        raise ConfigError(f"{path}: {len(rows)} rows, expected {size}")
    if key not in rows[0]:
        return np.array([float(r["value"]) for r in rows])
    out = np.full(size, np.nan)
    for r in rows:
        parts = [int(v) for v in r[key].split("-")] if r[key] else []
        if kind is Kind.TABLE_TERMINAL:
            idx = int(np.ravel_multi_index(tuple(parts), (n + 1,) * m))
        else:
            idx = 0
            for label in parts:
                idx = idx * (1 << m) + (label - 1)
        out[idx] = float(r["value"])
    if np.isnan(out).any():
        raise ConfigError(f"{path}: some {key} entries are missing or repeated")
    return out


def parse_config(raw: dict, base_dir: Path = Path("."), need_payoff: bool = True) -> RunConfig:
    try:
        market = MarketParams.from_mapping(raw["market"])
        payoff = None
        if need_payoff:
            spec = dict(raw["payoff"])
            if "csv" in spec:
                spec["values"] = load_table(base_dir / spec.pop("csv"), Kind(spec["kind"]), market)
            payoff = PayoffFn.from_mapping(spec)
        budgets = Budgets(**raw.get("budgets", {}))
        cfg = RunConfig(
            market,
            payoff,
            raw.get("method", "auto"),
            raw.get("nodes", "root"),
            float(raw.get("tolerance", 1e-9)),
            budgets,
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, OSError) as exc:
        raise ConfigError(f"{type(exc).__name__}: {exc}") from exc
    if cfg.method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {cfg.method!r}")
    if cfg.nodes not in NODE_SETS:
        raise ConfigError(f"nodes must be one of {NODE_SETS}, got {cfg.nodes!r}")
    return cfg


def read_config(path: str, need_payoff: bool = True) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(raw, Path(path).parent, need_payoff)


def fmt(x: float) -> str:
    return f"{float(x) + 0.0:.12g}"


# ---------------------------------------------------------------------------
# price


def closed_form_plan(cfg: RunConfig, cert: Certification) -> str | None:
    """How the closed form applies, or ``None`` if it cannot give both bounds."""
    c = cert.certificate
    if c is Certificate.MODULAR:
        return "modular"
    if not c.closed_form_legal:
        return None
    # the q_* product is needed for the lower bound of supermodular claims
    # and for the upper bound of submodular ones
    if not lower_product_available(cfg.market):
        return None
    return "submodular" if c is Certificate.SUBMODULAR else "supermodular"


def closed_surface(cfg: RunConfig, plan: str) -> BoundsSurface:
    budgets = cfg.budgets
    if plan == "modular":
        # every martingale measure gives the same price for a modular claim
        surf = closed_form_surface(cfg.market, cfg.payoff, need_lower=False,
                                   max_terms=budgets.max_terms)
        surf.lower = [u.copy() for u in surf.upper]
        return surf
    return closed_form_surface(cfg.market, cfg.payoff, submodular=plan == "submodular",
                               max_terms=budgets.max_terms)


def _rows(surface: BoundsSurface, nodes: str):
    """Yield ``(level, index, up_counts_label, prefix_label)`` in output order."""
    last = surface.params.num_steps if nodes == "all" else 0
    for k in range(last + 1):
        labels = surface.labels(k)
        prefixes = surface.prefixes(k) if surface.path_dependent else [None] * len(labels)
        for i, (lab, pre) in enumerate(zip(labels, prefixes)):
            yield k, i, lab, pre


def render_price(surfaces: dict[str, BoundsSurface], nodes: str) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    first = next(iter(surfaces.values()))
    header = ["level", "up_counts", "c_min", "c_max", "method_used"]
    if first.path_dependent:
        header.append("prefix")
    writer.writerow(header)
    both = len(surfaces) == 2
    for k, i, lab, pre in _rows(first, nodes):
        tail = [pre] if first.path_dependent else []
        for name, surf in surfaces.items():
            writer.writerow([k, lab, fmt(surf.lower[k][i]), fmt(surf.upper[k][i]), name, *tail])
        if both:
            lp, cf = surfaces["lp"], surfaces["closed"]
            writer.writerow([k, lab, fmt(abs(lp.lower[k][i] - cf.lower[k][i])),
                             fmt(abs(lp.upper[k][i] - cf.upper[k][i])), "absdiff", *tail])
    return out.getvalue()


def cmd_price(cfg: RunConfig, threads: int = 1) -> str:
    method = cfg.method
    plan = None
    if method != "lp":
        cert = certify(cfg.payoff, cfg.market, cfg.tolerance, cfg.budgets.max_fibre_bits)
        plan = closed_form_plan(cfg, cert)
        if plan is None and method in ("closed", "both"):
            why = (cert.reason or "no fibrewise certificate") if not \
                cert.certificate.closed_form_legal else "sum(b) > 1 with m > 2, q_* is not a product"
            raise CertificationFailure(
                f"closed form unavailable (certificate {cert.certificate.value}): {why}"
            )
        if method == "auto":
            method = "closed" if plan else "lp"
    surfaces: dict[str, BoundsSurface] = {}
    if method in ("lp", "both"):
        surfaces["lp"] = backward_induction_bounds(
            cfg.market, cfg.payoff, tol=cfg.tolerance,
            max_scenario_bits=cfg.budgets.max_scenario_bits,
            threads=threads, keep_measures=False,
        )
    if method in ("closed", "both"):
        surfaces["closed"] = closed_surface(cfg, plan)
    return render_price(surfaces, cfg.nodes)


# ---------------------------------------------------------------------------
# certify


def cmd_certify(cfg: RunConfig) -> str:
    cert = certify(cfg.payoff, cfg.market, cfg.tolerance, cfg.budgets.max_fibre_bits)
    lines = [cert.certificate.value]
    if cert.structural:
        lines.append("basis=structural")
    if cert.reason:
        lines.append(f"reason={cert.reason}")
    w = cert.witness
    if w is not None:
        # witness values are stored by subset mask; print them in column order
        fibre = np.asarray(w.values)[column_to_mask(cfg.market.num_assets)]
        fixed = "-".join(map(str, w.fixed))
        lines += [
            f"step={w.step}",
            f"{'other_up_counts' if w.fixed_are_counts else 'other_columns'}={fixed}",
            f"S={{{','.join(map(str, w.S))}}}",
            f"T={{{','.join(map(str, w.T))}}}",
            "fibre=" + ",".join(fmt(v) for v in fibre),
        ]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# vertices


def cmd_vertices(cfg: RunConfig) -> str:
    params = cfg.market
    A, d = martingale_constraints(params)
    verts = enumerate_vertices(A, d, cfg.tolerance, max_vertices=cfg.budgets.max_vertices,
                               max_seconds=cfg.budgets.max_seconds)
    marks = {"upper": vertex_measure(params, "upper").weights}
    try:
        marks["lower"] = vertex_measure(params, "lower").weights
    except MassOverflow:
        pass
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["vertex", "flag", *(f"p{j}" for j in range(1, params.num_columns + 1))])
    for idx, v in enumerate(verts):
        flags = [name for name, w in marks.items() if np.abs(v - w).max() <= 1e3 * cfg.tolerance]
        writer.writerow([idx, "+".join(flags), *(fmt(x) for x in v)])
    return out.getvalue()


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multibinom", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    price = sub.add_parser("price", help="bounds surface as CSV")
    price.add_argument("--config", required=True)
    price.add_argument("--method", choices=METHODS)
    price.add_argument("--nodes", choices=NODE_SETS)
    price.add_argument("--threads", type=int, default=1)
    for name, text in (("certify", "fibrewise modularity certificate"),
                       ("vertices", "vertices of the single-step martingale polytope")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = read_config(args.config, need_payoff=args.command != "vertices")
        if args.command == "price":
            overrides = {k: v for k, v in (("method", args.method), ("nodes", args.nodes)) if v}
            cfg = RunConfig(**{**cfg.__dict__, **overrides})
            text = cmd_price(cfg, max(1, args.threads))
        elif args.command == "certify":
            text = cmd_certify(cfg)
        else:
            text = cmd_vertices(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CertificationFailure as exc:
        print(f"certification failure: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATE
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except PricingError as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(text)
    return EXIT_OK


__all__ = ["Budgets", "RunConfig", "cmd_certify", "cmd_price", "cmd_vertices", "load_table",
           "main", "parse_config"]
