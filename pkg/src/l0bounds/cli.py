"""Command-line front end.

Subcommands mirror the library surface: ``bounds`` (theorem constants for a
design), ``fit`` (one penalized fit from CSV data), ``coverage`` (Monte
Carlo coverage experiment), ``grid`` (covering-grid construction), and
``verify`` (tail / moment-control checks).  All configuration comes from a
JSON file; results are written as JSON (plus CSV for coverage) into --out.

Exit codes: 0 success, 1 configuration/validation error, 2 computation
error (diverging series, budget blow-ups, non-identifiable links, ...).
Input files are never modified.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analytic, bounds, domains, estimator, expfam, grids, harness
from .design import DesignMatrix, load_matrix_csv, load_vector_csv


class ConfigError(Exception):
    """Bad or missing configuration; maps to exit code 1."""


# ----------------------------------------------------------------------------
# config parsers
# ----------------------------------------------------------------------------


def _need(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config is missing required key {key!r}")
    return cfg[key]


def parse_link(d: dict) -> analytic.AnalyticFn:
    try:
        tag = _need(d, "tag")
        if tag == "logistic_flip":
            return analytic.logistic_flip(_need(d, "p01"), _need(d, "p11"))
        if tag == "linear":
            return analytic.linear(_need(d, "a"), d.get("b", 0.0))
        if tag == "polynomial":
            return analytic.polynomial(_need(d, "coeffs"))
        if tag == "exp":
            return analytic.exp_fn()
        raise ConfigError(f"unknown link tag {tag!r}")
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad link block: {exc}") from exc


def parse_family(d: dict) -> expfam.ExpFamily:
    try:
        tag = _need(d, "tag")
        if tag == "bernoulli":
            return expfam.bernoulli()
        if tag == "gaussian":
            return expfam.gaussian(d.get("sigma2", 1.0))
        raise ConfigError(f"unknown family tag {tag!r}")
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad family block: {exc}") from exc


def parse_noise(d: dict) -> harness.NoiseModel:
    try:
        tag = _need(d, "tag")
        if tag == "gaussian_iid":
            return harness.gaussian_iid(_need(d, "sigma"))
        if tag == "gaussian_correlated":
            return harness.gaussian_correlated(_need(d, "sigma"), d.get("rho", 0.5))
        if tag == "bounded_iid":
            return harness.bounded_iid(_need(d, "sigma"))
        if tag == "bernoulli_residual":
            return harness.bernoulli_residual()
        if tag == "flip_channel":
            return harness.flip_channel(_need(d, "p01"), _need(d, "p11"))
        raise ConfigError(f"unknown noise tag {tag!r}")
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad noise block: {exc}") from exc


def parse_interval(v) -> domains.Interval:
    try:
        lo, hi = float(v[0]), float(v[1])
        return domains.Interval(lo, hi)
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"bad interval {v!r}: {exc}") from exc


def parse_domain(d: dict) -> domains.DomainSpec:
    try:
        return domains.DomainSpec(
            interval=parse_interval(_need(d, "interval")),
            max_support=float(_need(d, "max_support")),
            l1inf_cap=d.get("l1inf_cap"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad domain block: {exc}") from exc


def load_design(args, cfg: dict) -> DesignMatrix:
    if getattr(args, "x", None):
        try:
            return DesignMatrix(load_matrix_csv(args.x))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load design from {args.x}: {exc}") from exc
    d = cfg.get("design")
    if d is None:
        raise ConfigError("no design: pass --x or a 'design' config block")
    tag = _need(d, "tag")
    n, p = int(_need(d, "n")), int(_need(d, "p"))
    seed = int(d.get("seed", 0))
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xDE5)))
    if tag == "pm1_iid":
        return DesignMatrix(rng.choice([-1.0, 1.0], size=(n, p)))
    if tag == "gaussian_iid":
        return DesignMatrix(rng.normal(0.0, 1.0, size=(n, p)))
    if tag == "binary_iid":
        X = rng.integers(0, 2, size=(n, p)).astype(float)
        for j in range(p):
            if not X[:, j].any():
                X[int(rng.integers(n)), j] = 1.0
        return DesignMatrix(X)
    raise ConfigError(f"unknown design tag {tag!r}")


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------


def _cmd_bounds(args, cfg: dict) -> dict:
    dm = load_design(args, cfg)
    theorem = _need(cfg, "theorem")
    I = parse_interval(_need(cfg, "interval"))
    q = float(_need(cfg, "q"))
    nu = float(_need(cfg, "nu"))
    sigma = float(cfg.get("sigma", 1.0))
    K = int(cfg.get("K", 60))
    if theorem == "glm":
        fam = parse_family(_need(cfg, "family"))
        rep = bounds.glm_report(dm, fam, I, sigma, q, nu)
    elif theorem == "one_disc":
        f = parse_link(_need(cfg, "link"))
        rep = bounds.one_disc_report(dm, f, I, sigma, q, nu, float(_need(cfg, "theta")), K=K)
    elif theorem in ("ub_strip", "ub_interval"):
        f = parse_link(_need(cfg, "link"))
        rep = bounds.ub_report(
            dm, f, I, sigma, q, nu,
            rho1=float(_need(cfg, "rho1")), theta=float(cfg.get("theta", 0.75)),
            h=cfg.get("h"), delta_D=cfg.get("delta_D"),
            mode=theorem.removeprefix("ub_"), K=K,
        )
    else:
        raise ConfigError(f"unknown theorem {theorem!r}")
    return json.loads(rep.to_json())


def _cmd_fit(args, cfg: dict) -> dict:
    if not args.x or not args.y:
        raise ConfigError("fit needs --x and --y CSV paths")
    dm = load_design(args, cfg)
    try:
        y = load_vector_csv(args.y)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load response from {args.y}: {exc}") from exc
    D = parse_domain(_need(cfg, "domain"))
    loss = _need(cfg, "loss")
    kwargs = dict(
        y=y, X=dm, domain=D, c_r=float(_need(cfg, "c_r")),
        h_max=int(_need(cfg, "h_max")), loss=loss,
    )
    if loss == "mle":
        kwargs["family"] = parse_family(_need(cfg, "family"))
    elif loss == "lse":
        kwargs["link"] = parse_link(_need(cfg, "link"))
    else:
        raise ConfigError("loss must be 'mle' or 'lse'")
    try:
        prob = estimator.FitProblem(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    res = estimator.fit(prob)
    return {
        "beta_hat": [float(v) for v in res.beta_hat.values],
        "support": list(res.support),
        "objective": res.objective,
        "loss": res.loss_value,
        "tie_break_applied": res.tie_break_applied,
        "n_supports": res.n_supports,
    }


def _cmd_coverage(args, cfg: dict) -> dict:
    try:
        ecfg = harness.ExperimentConfig.from_dict(cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad experiment config: {exc}") from exc
    if args.seed is not None:
        ecfg.seed = args.seed
    result = harness.run_coverage(ecfg)
    if args.out:
        result.to_csv(Path(args.out) / "coverage.csv")
    return json.loads(result.to_json())


def _cmd_grid(args, cfg: dict) -> dict:
    dm = load_design(args, cfg)
    f = parse_link(_need(cfg, "link"))
    D = parse_domain(_need(cfg, "domain"))
    br = cfg.get("b_rule", {"rule": "half_radius"})
    rule = ("half_radius",) if br.get("rule") == "half_radius" else ("constant", float(_need(br, "c")))
    G = grids.build_grid(dm, f, D, int(_need(cfg, "h")), b_rule=rule)
    return json.loads(G.to_json())


def _cmd_verify(args, cfg: dict) -> dict:
    what = _need(cfg, "what")
    noise = parse_noise(_need(cfg, "noise"))
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 2026))
    if what == "tail":
        return harness.verify_tail(
            noise,
            trials=int(cfg.get("trials", 100_000)),
            n=int(cfg.get("n", 20)),
            n_dirs=int(cfg.get("n_dirs", 8)),
            seed=seed,
        )
    if what == "control":
        dm = load_design(args, cfg)
        f = parse_link(_need(cfg, "link"))
        centers = cfg.get("centers")
        if centers is None:
            centers = [[0.0] * dm.p]
        return harness.verify_control_event(
            dm, f, [np.asarray(c, float) for c in centers], noise,
            q=float(_need(cfg, "q")),
            K_check=int(cfg.get("K_check", 3)),
            trials=int(cfg.get("trials", 10_000)),
            seed=seed,
        )
    raise ConfigError("verify 'what' must be 'tail' or 'control'")


_COMMANDS = {
    "bounds": (_cmd_bounds, "bounds.json"),
    "fit": (_cmd_fit, "fit.json"),
    "coverage": (_cmd_coverage, "coverage.json"),
    "grid": (_cmd_grid, "grid.json"),
    "verify": (_cmd_verify, "verify.json"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="l0bounds",
        description="L0-penalized nonlinear regression with certified error radii",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON configuration file")
        sp.add_argument("--x", help="design matrix CSV (headerless)")
        sp.add_argument("--y", help="response vector CSV (fit only)")
        sp.add_argument("--out", help="output directory (default: cwd)")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--quiet", action="store_true", help="suppress the summary line")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config root must be a JSON object")
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
        fn, outname = _COMMANDS[args.command]
        result = fn(args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, AssertionError, np.linalg.LinAlgError) as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out) if args.out else Path.cwd()
    out_path = out_dir / outname
    with open(out_path, "w") as fh:
        json.dump(result, fh, indent=2, default=str)
        fh.write("\n")
    if not args.quiet:
        summary = {
            "bounds": lambda r: f"c_r={r['c_r']:.6g} kappa_r={r['kappa_r']:.6g}",
            "fit": lambda r: f"support={r['support']} objective={r['objective']:.6g}",
            "coverage": lambda r: (
                f"coverage={r['coverage']:.3f} wilson_lo={r['wilson_lo']:.3f} "
                f"target={r['target']:.3f} passed={r['passed']}"
            ),
            "grid": lambda r: f"size={r['size']} bound={r['cardinality_bound']:.6g}",
            "verify": lambda r: f"ok={r.get('all_ok', r.get('ok'))}",
        }[args.command](result)
        print(f"{args.command}: {summary} -> {out_path}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
