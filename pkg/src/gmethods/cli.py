"""Command-line front end: simulation, replicate studies, and reports.

Configuration is a single YAML file with a required ``config_version: 1``
key; the subcommands read the sections they need.  Flags ``--seed``,
``--out`` and ``--jobs`` override their config counterparts.  Exit codes:
0 success, 1 analysis or threshold failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import functools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import yaml

from .data import Regime, write_csv
from .direct_effect import (
    DeSndmSpec,
    SplitSchema,
    direct_effect_g_estimate,
    direct_effect_gnull_test,
)
from .errors import ConfigError, GmethodsError, ValidationError
from .gformula import ConditionalLaws, g_formula_exact, g_formula_mc
from .reproduce import REPRODUCERS, run as run_reproduction
from .scenarios import design_alpha, enumerate_joint, make_scenario, simulate
from .sndm import BlipSpec, g_estimate
from .studies import (
    StudyConfig,
    format_summary,
    replicate_seed,
    run_study,
    summarize,
    write_study_log,
)


def _load_config(path: str | None) -> dict:
    if path is None:
        raise ConfigError("this subcommand needs --config")
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file is not valid YAML: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping of sections")
    version = cfg.get("config_version")
    if version != 1:
        raise ConfigError("config_version must be present and equal to 1")
    return cfg


def _tuplify(value):
    """YAML lists become tuples so they can feed frozen law definitions."""
    if isinstance(value, list):
        return tuple(_tuplify(v) for v in value)
    if isinstance(value, dict):
        return {k: _tuplify(v) for k, v in value.items()}
    return value


def _scenario_from(cfg: dict):
    sect = cfg.get("scenario")
    if sect is None:
        raise ConfigError("missing 'scenario' section")
    if isinstance(sect, str):
        return make_scenario(sect)
    name = sect.get("name")
    if name is None:
        raise ConfigError("missing 'scenario.name' key")
    return make_scenario(name, _tuplify(sect.get("params", {}) or {}))


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing '{key}' key")
    return cfg[key]


def _seed_of(args, cfg: dict) -> int:
    if args.seed is not None:
        return args.seed
    return int(_require(cfg, "seed"))


def _out_dir(args, cfg: dict) -> str:
    out = args.out or cfg.get("out") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _jobs_of(args, cfg: dict) -> int:
    jobs = args.jobs if args.jobs is not None else int(cfg.get("jobs", 1))
    if jobs < 1:
        raise ConfigError("jobs must be at least 1")
    return jobs


def _threshold_rule(m: int, l_bar: tuple[float, ...], cutoff: float) -> float:
    return 1.0 if l_bar[-1] >= cutoff else 0.0


def _regime_from(sect) -> Regime:
    if sect is None:
        raise ConfigError("missing 'regime' section")
    kind = sect.get("kind")
    if kind == "static":
        plan = sect.get("plan")
        if plan is None:
            raise ConfigError("static regime needs a 'plan' list")
        return Regime.static(tuple(float(v) for v in plan))
    if kind == "threshold":
        cutoff = float(sect.get("cutoff", 0.5))
        rule = functools.partial(_threshold_rule, cutoff=cutoff)
        return Regime.dynamic(rule, name=f"treat-if-covariate>={cutoff:g}")
    raise ConfigError("regime.kind must be 'static' or 'threshold'")


def _blip_from(sect) -> BlipSpec:
    if sect is None:
        raise ConfigError("missing 'blip' section")
    family = sect.get("family", "additive")
    cofactors = sect.get("cofactors")
    if not cofactors:
        raise ConfigError("blip needs a non-empty 'cofactors' list")
    return BlipSpec(family, tuple(str(c) for c in cofactors))


def _alpha_from(cfg: dict, scenario, terms, occasions=None):
    raw = cfg.get("alpha_known")
    if raw is None:
        return None
    if raw == "design":
        alpha = design_alpha(scenario, terms, occasions)
        if alpha is None:
            raise ConfigError(
                "alpha_known: design — but the scenario's assignment laws do "
                f"not share a logistic model on terms {terms}"
            )
        return alpha
    return tuple(float(v) for v in raw)


# ---------------------------------------------------------------------------
# Subcommands.
# ---------------------------------------------------------------------------


def _sim_one(scenario, n: int, seed: int):
    return simulate(scenario, n, seed)


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    scenario = _scenario_from(cfg)
    n = int(_require(cfg, "n"))
    reps = int(cfg.get("replicates", 1))
    seed = _seed_of(args, cfg)
    jobs = _jobs_of(args, cfg)
    out = _out_dir(args, cfg)
    seeds = [replicate_seed(seed, i) for i in range(reps)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            datasets = list(pool.map(_sim_one, [scenario] * reps, [n] * reps, seeds))
    else:
        datasets = [simulate(scenario, n, s) for s in seeds]
    files = []
    for i, (ds, s) in enumerate(zip(datasets, seeds)):
        fname = f"{scenario.name}-rep{i:03d}.csv"
        write_csv(ds, os.path.join(out, fname))
        files.append({"replicate": i, "seed": s, "rows": n, "file": fname})
    manifest = {
        "config_version": 1,
        "scenario": scenario.name,
        "n": n,
        "replicates": reps,
        "seed": seed,
        "files": files,
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {reps} replicate file(s) and manifest.json to {out}")
    return 0


def cmd_study(args) -> int:
    cfg = _load_config(args.config)
    scenario = _scenario_from(cfg)
    analyses_cfg = _require(cfg, "analyses")
    if not isinstance(analyses_cfg, list) or not analyses_cfg:
        raise ConfigError("'analyses' must be a non-empty list")
    analyses = []
    for item in analyses_cfg:
        if isinstance(item, str):
            analyses.append((item, {}))
            continue
        name = item.get("name")
        if name is None:
            raise ConfigError("each analysis needs a 'name' key")
        analyses.append((name, _tuplify(item.get("params", {}) or {})))
    study = StudyConfig(
        scenario=scenario,
        n=int(_require(cfg, "n")),
        replicates=int(_require(cfg, "replicates")),
        seed=_seed_of(args, cfg),
        analyses=tuple(analyses),
    )
    jobs = _jobs_of(args, cfg)
    out = _out_dir(args, cfg)
    rows = run_study(study, jobs=jobs)
    log_path = os.path.join(out, "study-log.csv")
    write_study_log(log_path, rows)
    print(format_summary(summarize(rows)))
    print(f"study log: {log_path}")
    errored = [r for r in rows if r.error]
    if errored:
        print(f"{len(errored)} replicate analysis run(s) errored; see the log",
              file=sys.stderr)
        return 1
    return 0


def cmd_reproduce(args) -> int:
    report = run_reproduction(args.name, args.seed)
    print(report.format())
    return 0 if report.passed else 1


def cmd_g_formula(args) -> int:
    cfg = _load_config(args.config)
    scenario = _scenario_from(cfg)
    regime = _regime_from(cfg.get("regime"))
    method = cfg.get("method", "exact")
    table = enumerate_joint(scenario)
    if method == "exact":
        dist = g_formula_exact(table, regime)
    elif method == "mc":
        draws = int(cfg.get("draws", 100_000))
        seed = _seed_of(args, cfg)
        dist = g_formula_mc(ConditionalLaws.from_table(table), regime, draws, seed)
    else:
        raise ConfigError("method must be 'exact' or 'mc'")
    out = _out_dir(args, cfg)
    path = os.path.join(out, f"g-formula-{method}.csv")
    dist.to_csv(path)
    print(f"standardized mean under {regime.name}: {dist.mean():.6f}")
    print(f"distribution grid: {path}")
    return 0


def cmd_g_estimate(args) -> int:
    cfg = _load_config(args.config)
    scenario = _scenario_from(cfg)
    n = int(_require(cfg, "n"))
    seed = _seed_of(args, cfg)
    ds = simulate(scenario, n, seed)
    blip = _blip_from(cfg.get("blip"))
    terms = tuple(cfg.get("treatment_terms", ("1", "lm", "a_prev")))
    box = _require(cfg, "psi_box")
    alpha = _alpha_from(cfg, scenario, terms)
    est = g_estimate(
        ds, blip,
        treatment_terms=terms,
        psi_box=box,
        alpha_known=alpha,
        grid_points=_tuplify(cfg.get("grid_points", 201)),
    )
    out = _out_dir(args, cfg)
    path = os.path.join(out, "g-estimate-grid.csv")
    est.to_csv(path)
    psi = ", ".join(f"{v:.4f}" for v in est.psi_hat)
    print(f"psi_hat = ({psi});  score p-value at psi_hat = {est.p_at_hat:.4f}")
    if est.confidence_set.size:
        lo = est.confidence_set.min(axis=0)
        hi = est.confidence_set.max(axis=0)
        rng = ", ".join(f"[{a:.4f}, {b:.4f}]" for a, b in zip(lo, hi))
        print(f"{100 * (1 - est.level):.0f}% confidence set within: {rng}")
    else:
        print("confidence set is empty at the grid resolution")
    if est.note:
        print(f"note: {est.note}")
    print(f"grid: {path}")
    return 0


def cmd_direct_effect(args) -> int:
    cfg = _load_config(args.config)
    scenario = _scenario_from(cfg)
    n = int(_require(cfg, "n"))
    seed = _seed_of(args, cfg)
    ds = simulate(scenario, n, seed)
    mode = cfg.get("mode", "test")
    out = _out_dir(args, cfg)
    if mode == "test":
        a1_law = scenario.a_laws[1] if cfg.get("known_design", False) else None
        rep = direct_effect_gnull_test(ds, a1_law=a1_law)
        verdict = "reject" if rep.reject else "no evidence against"
        print(f"direct-effect test: statistic = {rep.statistic:.4f}, "
              f"p = {rep.p_value:.4f} -> {verdict} the no-direct-effect null")
        if rep.note:
            print(f"note: {rep.note}")
        return 0
    if mode == "estimate":
        split_cfg = _require(cfg, "split")
        split = SplitSchema(tuple(int(v) for v in split_cfg.get("p", ())),
                            tuple(int(v) for v in split_cfg.get("z", ())))
        spec = DeSndmSpec(_blip_from(cfg.get("blip")),
                          mean_terms=tuple(cfg.get("mean_terms", ("1",))))
        z_terms = tuple(cfg.get("z_terms", ("1", "lm", "a_prev")))
        if cfg.get("known_design", False):
            z_laws = {k: scenario.a_laws[k] for k in split.z_occasions}
            p_alpha = design_alpha(scenario, z_terms, occasions=split.p_occasions)
        else:
            z_laws, p_alpha = None, None
        est = direct_effect_g_estimate(
            ds, split, spec,
            psi_box=_require(cfg, "psi_box"),
            z_laws=z_laws,
            z_terms=z_terms,
            p_alpha_known=p_alpha,
            grid_points=_tuplify(cfg.get("grid_points", 201)),
        )
        path = os.path.join(out, "direct-effect-grid.csv")
        est.to_csv(path)
        psi = ", ".join(f"{v:.4f}" for v in est.psi_hat)
        print(f"psi_hat = ({psi});  score p-value at psi_hat = {est.p_at_hat:.4f}")
        if est.note:
            print(f"note: {est.note}")
        print(f"grid: {path}")
        return 0
    raise ConfigError("mode must be 'test' or 'estimate'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gmethods",
        description="Sequential-treatment analyses: simulation, replicate "
                    "studies, standardization, g-estimation, direct effects.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_help="root seed (overrides the config)"):
        p.add_argument("--config", help="YAML configuration file")
        p.add_argument("--seed", type=int, help=seed_help)
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--jobs", type=int, help="worker processes")

    p = sub.add_parser("simulate", help="write replicate datasets and a manifest")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("study", help="run analyses over replicates; write a study log")
    common(p)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("reproduce", help="re-run a pinned-seed benchmark")
    p.add_argument("name", choices=sorted(REPRODUCERS),
                   help="which benchmark to regenerate")
    p.add_argument("--seed", type=int, help="override the pinned root seed")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("g-formula", help="standardized outcome law under a regime")
    common(p)
    p.set_defaults(func=cmd_g_formula)

    p = sub.add_parser("g-estimate", help="g-estimation of a shift parameter")
    common(p)
    p.set_defaults(func=cmd_g_estimate)

    p = sub.add_parser("direct-effect", help="weighted direct-effect test or estimate")
    common(p)
    p.set_defaults(func=cmd_direct_effect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except GmethodsError as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
