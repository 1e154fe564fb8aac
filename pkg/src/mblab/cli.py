"""Command line interface.

Subcommands:
  gen      build a filtration and emit it
  check    run the identity/inequality suites on a seeded witness
  certify  run the schedule certifier for a candidate on a seeded witness
  lemma1   expand dyadic split configurations and report separation ratios
  search   lower-bound search for the pairing over unit-norm witnesses
  scan     norm-ratio scan over random witnesses and extremal multipliers
  bound    certified duality bound over a spread of dual draws

Exit codes: 0 success, 1 a check/certificate/bound failed, 2 bad usage or
infeasible configuration.  Tolerances scale with the MBL_TOL environment
variable.  All randomized commands require --seed and are deterministic
given it; reports are byte-identical across repeated runs.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bellman import (
    dyadic_expand,
    expansion_to_json,
    linear_candidate,
    quadratic_candidate,
    sample_dyadic_split_configs,
)
from .certifier import CertificationError, certificate_rows, certificate_to_dict, certify
from .checks import SUITES, Tolerances, run_all
from .corpus import haar_witness, max_children_for, random_transform, random_witness
from .estimator import (
    EstimateError,
    duality_bound,
    duality_candidate,
    lower_bound_search,
    lp_constant_scan,
)
from .filtration import (
    FiltrationError,
    RatioSamplingError,
    build_dyadic,
    build_random_regular,
    filtration_to_json,
)
from .reporting import ReportError, rows_to_csv, to_canonical_json, write_text
from .transforms import ContractionError, PredictabilityError, transform_to_json

__all__ = ["RunConfig", "main", "run"]


@dataclass
class RunConfig:
    """Merged knobs for one command; file values sit below flag values."""

    seed: int | None = None
    depth: int | None = None
    delta: float = 0.5
    dim: int = 1
    p: float = 2.0
    trials: int = 100
    out: str | None = None
    fmt: str = "json"
    max_children: int | None = None
    split_prob: float = 0.7
    witness: str = "random"
    candidate: str = "quadratic"
    target: float | None = None
    ascent: int = 0
    m: int = 6
    suites: str | None = None


_CONFIG_KEYS = {f.name for f in dataclasses.fields(RunConfig)}


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", type=str, default=None, help="JSON file with defaults")
    shared.add_argument("--seed", type=int, default=None)
    shared.add_argument("--depth", type=int, default=None)
    shared.add_argument("--delta", type=float, default=None)
    shared.add_argument("--dim", type=int, default=None)
    shared.add_argument("--p", type=float, default=None)
    shared.add_argument("--trials", type=int, default=None)
    shared.add_argument("--out", type=str, default=None)
    shared.add_argument("--format", dest="fmt", choices=("json", "csv"), default=None)
    shared.add_argument("--max-children", dest="max_children", type=int, default=None)
    shared.add_argument("--split-prob", dest="split_prob", type=float, default=None)
    shared.add_argument("--witness", choices=("random", "structured"), default=None)
    shared.add_argument("--candidate", type=str, default=None)
    shared.add_argument("--target", type=float, default=None)
    shared.add_argument("--ascent", type=int, default=None)
    shared.add_argument("--m", type=int, default=None)
    shared.add_argument("--suites", type=str, default=None)

    parser = argparse.ArgumentParser(prog="mblab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("gen", "build a filtration and emit it"),
        ("check", "run identity and inequality suites"),
        ("certify", "run the schedule certifier"),
        ("lemma1", "expand dyadic configurations, report separation ratios"),
        ("search", "lower-bound search for the pairing"),
        ("scan", "norm-ratio scan"),
        ("bound", "certified duality bound"),
    ):
        sub.add_parser(name, parents=[shared], help=text)
    return parser


def _merge_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if args.config is not None:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {args.config}: {exc}")
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(loaded) - _CONFIG_KEYS
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        for key, value in loaded.items():
            setattr(cfg, key, value)
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    return cfg


class UsageError(ValueError):
    pass


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        write_text(cfg.out, text)
    else:
        sys.stdout.write(text)


def _require_seed(cfg: RunConfig) -> int:
    if cfg.seed is None:
        raise UsageError("this command draws randomness; --seed is required")
    return cfg.seed


def _filtration(cfg: RunConfig):
    depth = cfg.depth if cfg.depth is not None else 3
    if cfg.delta == 0.5:
        return build_dyadic(depth)
    seed = _require_seed(cfg)
    return build_random_regular(
        depth=depth,
        delta=cfg.delta,
        max_children=cfg.max_children or max_children_for(cfg.delta),
        split_prob=cfg.split_prob,
        seed=seed,
    )


def _witness(cfg: RunConfig, filt):
    if cfg.witness == "structured":
        return haar_witness(filt, cfg.dim)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=_require_seed(cfg), spawn_key=(1,)))
    f, g = random_witness(filt, cfg.dim, rng)
    op = random_transform(filt, cfg.dim, rng)
    return f, g, op


def _candidate(cfg: RunConfig, filt):
    chosen = cfg.candidate
    name, _, arg = chosen.partition(":")
    if name == "quadratic":
        delta = float(arg) if arg else filt.delta
        if cfg.p == 2.0:
            return quadratic_candidate(delta)
        return duality_candidate(cfg.p, delta)
    if name == "linear":
        if not arg:
            raise UsageError("linear candidate needs a constant: linear:<cp>")
        return linear_candidate(float(arg), cfg.p, filt.delta)
    raise UsageError(f"unknown candidate '{chosen}'; use quadratic[:delta] or linear:<cp>")


# ---------------------------------------------------------------------------
# Commands


def cmd_gen(cfg: RunConfig) -> int:
    filt = _filtration(cfg)
    if cfg.fmt == "json":
        payload = {"filtration": json.loads(filtration_to_json(filt))}
        # a structured witness is deterministic; a random one needs the seed
        if cfg.witness == "structured" or cfg.seed is not None:
            f, g, op = _witness(cfg, filt)
            payload["witness"] = {
                "kind": cfg.witness,
                "dim": cfg.dim,
                "f": f.values.tolist(),
                "g": g.values.tolist(),
                "transform": json.loads(transform_to_json(op)),
            }
        _emit(cfg, to_canonical_json(payload))
    else:
        rows = [
            {
                "id": a.id,
                "a": a.a,
                "b": a.b,
                "level": a.level,
                "parent": a.parent,
                "children": "|".join(str(c) for c in a.children),
            }
            for a in filt.atoms
        ]
        _emit(cfg, rows_to_csv(rows))
    return 0


def cmd_check(cfg: RunConfig) -> int:
    seed = _require_seed(cfg)
    filt = _filtration(cfg)
    f, g, op = _witness(cfg, filt)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(2,)))
    names = [s.strip() for s in cfg.suites.split(",")] if cfg.suites else None
    for name in names or []:
        if name not in SUITES:
            raise UsageError(f"unknown suite '{name}'; known: {sorted(SUITES)}")
    rows, ok = run_all(f, g, op, Tolerances.from_env(), rng, suites=names)
    if cfg.fmt == "json":
        _emit(cfg, to_canonical_json({"ok": ok, "rows": rows}))
    else:
        _emit(cfg, rows_to_csv(rows, fields=("check", "max_err", "tol", "ok", "detail")))
    return 0 if ok else 1


def cmd_certify(cfg: RunConfig) -> int:
    _require_seed(cfg)
    filt = _filtration(cfg)
    f, g, op = _witness(cfg, filt)
    cand = _candidate(cfg, filt)
    cert = certify(cand, f, g, op, tol=1e-9 * Tolerances.from_env().scale)
    if cfg.fmt == "json":
        _emit(cfg, to_canonical_json(certificate_to_dict(cert)))
    else:
        _emit(
            cfg,
            rows_to_csv(
                certificate_rows(cert),
                fields=("atom", "level", "measure", "d", "diameter", "pairing", "slack"),
            ),
        )
    return 0 if cert.ok else 1


def cmd_lemma1(cfg: RunConfig) -> int:
    seed = _require_seed(cfg)
    cfgs = sample_dyadic_split_configs(
        cfg.delta, cfg.p, cfg.trials, seed, dim=cfg.dim, m=cfg.m
    )
    rows = []
    worst = None
    for i, sc in enumerate(cfgs):
        cert = dyadic_expand(sc, m=cfg.m)
        rows.append(
            {
                "config": i,
                "m": cert.m,
                "copies": cert.copies,
                "separation": cert.separation,
                "diameter": cert.diameter,
                "ratio": cert.ratio,
                "degenerate": cert.degenerate,
            }
        )
        if not cert.degenerate and (worst is None or cert.ratio < worst[1].ratio):
            worst = (i, cert)
    ratios = [r["ratio"] for r in rows if r["ratio"] is not None]
    if cfg.fmt == "json":
        payload = {
            "delta": cfg.delta,
            "trials": cfg.trials,
            "min_ratio": min(ratios) if ratios else None,
            "degenerate": sum(1 for r in rows if r["degenerate"]),
            "rows": rows,
            "worst": None if worst is None else json.loads(expansion_to_json(worst[1])),
        }
        _emit(cfg, to_canonical_json(payload))
    else:
        _emit(
            cfg,
            rows_to_csv(
                rows,
                fields=("config", "m", "copies", "separation", "diameter", "ratio", "degenerate"),
            ),
        )
    return 0


def cmd_search(cfg: RunConfig) -> int:
    seed = _require_seed(cfg)
    res = lower_bound_search(
        cfg.p,
        cfg.trials,
        seed,
        target=cfg.target,
        delta=cfg.delta,
        dim=cfg.dim,
        depth=cfg.depth,
        ascent_steps=cfg.ascent,
    )
    if cfg.fmt == "json":
        payload = {
            "p": res.p,
            "delta": res.delta,
            "trials": res.trials,
            "target": res.target,
            "best": res.best,
            "found": res.found,
            "witness": res.witness,
            "achieved_point": None
            if res.achieved_point is None
            else res.achieved_point.to_dict(),
            "history": list(res.history),
        }
        _emit(cfg, to_canonical_json(payload))
    else:
        rows = [{"trial": i, "value": v} for i, v in enumerate(res.history)]
        _emit(cfg, rows_to_csv(rows, fields=("trial", "value")))
    return 0 if res.found else 1


def cmd_scan(cfg: RunConfig) -> int:
    seed = _require_seed(cfg)
    res = lp_constant_scan(
        cfg.p, cfg.trials, seed, delta=cfg.delta, dim=cfg.dim, depth=cfg.depth
    )
    tolerances = Tolerances.from_env()
    if cfg.fmt == "json":
        payload = {
            "p": res.p,
            "delta": res.delta,
            "dim": res.dim,
            "trials": res.trials,
            "max_ratio": res.max_ratio,
            "mean_ratio": res.mean_ratio,
            "argmax": res.argmax,
            "bin_edges": list(res.bin_edges),
            "counts": list(res.counts),
        }
        _emit(cfg, to_canonical_json(payload))
    else:
        rows = [
            {"bin_lo": res.bin_edges[i], "bin_hi": res.bin_edges[i + 1], "count": c}
            for i, c in enumerate(res.counts)
        ]
        _emit(cfg, rows_to_csv(rows, fields=("bin_lo", "bin_hi", "count")))
    if cfg.p == 2.0 and res.max_ratio > 1.0 + tolerances.tight:
        return 1
    return 0


def cmd_bound(cfg: RunConfig) -> int:
    seed = _require_seed(cfg)
    report = duality_bound(
        cfg.p,
        delta=cfg.delta,
        n_g=cfg.trials,
        seed=seed,
        dim=cfg.dim,
        depth=cfg.depth if cfg.depth is not None else 3,
        tol=1e-6 * Tolerances.from_env().scale,
    )
    if cfg.fmt == "json":
        payload = {
            "p": report.p,
            "q": report.q,
            "delta": report.delta,
            "cp": report.cp,
            "kappa": report.kappa,
            "analytic_bound": report.analytic_bound,
            "empirical_max": report.empirical_max,
            "draws": report.n_g,
            "ok": report.ok,
            "rows": list(report.rows),
        }
        _emit(cfg, to_canonical_json(payload))
    else:
        _emit(
            cfg,
            rows_to_csv(
                list(report.rows),
                fields=(
                    "draw",
                    "kind",
                    "objective",
                    "lambda",
                    "certified_bound",
                    "mean_term",
                    "bound",
                ),
            ),
        )
    return 0 if report.ok else 1


_COMMANDS = {
    "gen": cmd_gen,
    "check": cmd_check,
    "certify": cmd_certify,
    "lemma1": cmd_lemma1,
    "search": cmd_search,
    "scan": cmd_scan,
    "bound": cmd_bound,
}


def run(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
        return _COMMANDS[args.command](cfg)
    except (
        UsageError,
        FiltrationError,
        RatioSamplingError,
        PredictabilityError,
        ReportError,
        ValueError,
        KeyError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CertificationError, ContractionError, EstimateError, ArithmeticError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return 1


def main() -> int:
    return run()
