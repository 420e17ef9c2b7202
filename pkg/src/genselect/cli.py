"""Command-line entry points.

Subcommands cover the full pipeline: `simulate` sweeps the quality model,
`run` executes a harness experiment, `score` fits Bradley-Terry over an
artifact, `stats` runs the confirmatory and exploratory analyses,
`calibrate` estimates the crossover threshold, and `report` renders the
assembled tables.  Failures print one machine-readable JSON object to
stderr and exit with a code that distinguishes usage errors (2), bad
configs (3), and missing artifacts (4) from internal errors (1).

Live-backend credentials are taken from environment variables only; no
flag or config field carries a secret.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .calibration import CalibrationInput, calibrate_s_star, classify_regimes, \
    pilot_selector_s_hats
from .config import ExperimentConfig, bundled_mock_config_path, load_config
from .errors import ArtifactError, ConfigError, GenselectError
from .harness import ExperimentArtifact, bt_win_rate_table, decoupled_evaluation, \
    run_experiment, task_win_rates
from .quality import MonteCarloConfig, Team, crossover_threshold, \
    expected_quality, homogeneous_quality, team_stats
from .report import build_cell_table, build_judge_table, build_regression_table, \
    build_report, pilot_from_artifact, write_report
from .stats import holm_bonferroni

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_ARTIFACT = 4


class _Parser(argparse.ArgumentParser):
    """argparse with JSON errors on stderr instead of bare usage text."""

    def error(self, message):
        print(json.dumps({"error": "usage", "message": message}),
              file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _warn(message: str) -> None:
    print(json.dumps({"warning": message}), file=sys.stderr)


def _load(args) -> tuple[ExperimentConfig, Optional[Path]]:
    if args.config is None:
        return load_config(bundled_mock_config_path()), None
    path = Path(args.config)
    return load_config(path), path.parent


def _seed(args, cfg: ExperimentConfig) -> int:
    return args.seed if args.seed is not None else cfg.seed


def _calibration_team(cfg: ExperimentConfig) -> tuple[Team, float]:
    """Diverse team and best-member mean from the config's mock profiles.

    The team is the agent set of the cell with the most distinct agents;
    mu_best is its strongest member's mean quality, the homogeneous
    comparison point.
    """
    profiles = {p.model_id: p for p in cfg.mock_profiles}
    if not profiles:
        raise ConfigError("calibration needs mock profiles with quality laws")
    agents: tuple[str, ...] = ()
    for cell in cfg.cells:
        distinct = tuple(sorted(set(cell.agent_models)))
        if len(distinct) > len(agents):
            agents = distinct
    missing = [a for a in agents if a not in profiles]
    if missing:
        raise ConfigError(f"no mock profile for agents {missing}")
    team = Team(tuple((a, profiles[a].quality_law) for a in agents))
    mu_best = max(profiles[a].quality_law.mean for a in agents)
    return team, mu_best


def _emit(payload: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(payload)
        if not payload.endswith("\n"):
            sys.stdout.write("\n")
    else:
        Path(out).write_text(payload, encoding="utf-8")


def _emit_json(doc, out: Optional[str]) -> None:
    _emit(json.dumps(doc, indent=2, sort_keys=True), out)


# ------------------------------------------------------------ subcommands

def _cmd_simulate(args) -> int:
    """Q(T, s) vs best-member quality over an s grid, crossing at s*."""
    cfg, _base = _load(args)
    team, mu_best = _calibration_team(cfg)
    stats = team_stats(team, MonteCarloConfig(trials=args.trials,
                                              seed=_seed(args, cfg)))
    s_star = crossover_threshold(mu_best, stats)
    grid = sorted(set(np.linspace(0.0, 1.0, args.points)) | {s_star})
    lines = ["s,selection_team,homogeneous_best"]
    lines.extend(f"{s:.6f},{expected_quality(stats, s):.6f},"
                 f"{homogeneous_quality(mu_best, s):.6f}" for s in grid)
    _emit("\n".join(lines) + "\n", args.out)
    _warn(f"s_star = {s_star:.6f}")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg, base = _load(args)
    backend = cfg.build_backend(args.backend)
    artifact = run_experiment(
        cfg.cells, cfg.tasks(base), backend, _seed(args, cfg),
        baseline_model=cfg.baseline_model, baseline_pool=cfg.baseline_pool,
        gen_temperature=cfg.gen_temperature,
        judge_temperature=cfg.judge_temperature)
    artifact.save(args.artifact)
    _emit_json({"artifact": str(args.artifact),
                "cells": sorted({r.cell for r in artifact.records}),
                "records": len(artifact.records),
                "failed": sum(r.failed for r in artifact.records)}, None)
    return EXIT_OK


def _cmd_score(args) -> int:
    artifact = ExperimentArtifact.load(args.artifact)
    _emit_json({"bt_win_rate": bt_win_rate_table(artifact.records)}, args.out)
    return EXIT_OK


def _cmd_stats(args) -> int:
    artifact = ExperimentArtifact.load(args.artifact)
    reference = artifact.cells()[0].name
    reg = build_regression_table(artifact.records, reference)
    ols, mixed = reg["ols"], reg["mixed"]
    cell_terms = [name for name in ols.p_values if name != "intercept"]
    adjusted = dict(zip(cell_terms,
                        holm_bonferroni([ols.p_values[t] for t in cell_terms])))
    doc = {
        "cell_table": list(build_cell_table(artifact.records)),
        "regression": {
            "reference": reference,
            "ols": {"coefficients": ols.coefficients, "hc3_se": ols.hc3_se,
                    "p_values": ols.p_values, "p_values_holm": adjusted,
                    "r_squared": ols.r_squared, "f_stat": ols.f_stat,
                    "f_p_value": ols.f_p_value, "flags": list(ols.flags)},
            "random_intercept": {"coefficients": mixed.coefficients,
                                 "group_variance": mixed.group_variance,
                                 "residual_variance": mixed.residual_variance,
                                 "flags": list(mixed.flags)},
        },
        "judge_table": list(build_judge_table(artifact.records)),
        "task_win_rates": {f"{c}/{t}": v
                           for (c, t), v in sorted(task_win_rates(
                               artifact.records).items())},
    }
    _emit_json(doc, args.out)
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    cfg, _base = _load(args)
    artifact = ExperimentArtifact.load(args.artifact)
    team, mu_best = _calibration_team(cfg)
    seed = _seed(args, cfg)
    pilot = pilot_from_artifact(artifact, seed)
    inp = CalibrationInput(team=team, mu_best=mu_best, pilot_records=pilot,
                           b_bootstrap=args.bootstrap)
    s_star, ci = calibrate_s_star(inp, seed=seed)
    regime = classify_regimes(s_star, ci, pilot_selector_s_hats(inp))
    _emit_json({"s_star": s_star, "ci": list(ci),
                "per_selector": {label: {"s_hat": s_hat, "regime": r}
                                 for label, (s_hat, r)
                                 in regime.per_selector.items()}}, args.out)
    return EXIT_OK


def _cmd_report(args) -> int:
    cfg, _base = _load(args)
    artifact = ExperimentArtifact.load(args.artifact)
    seed = _seed(args, cfg)

    decoupled = None
    if cfg.independent_judges:
        try:
            decoupled = decoupled_evaluation(
                artifact, cfg.independent_judges, cfg.build_backend(args.backend),
                seed, judge_temperature=cfg.judge_temperature)
        except GenselectError as e:
            _warn(f"decoupled evaluation skipped: {e}")

    regime = None
    try:
        team, mu_best = _calibration_team(cfg)
        pilot = pilot_from_artifact(artifact, seed)
        inp = CalibrationInput(team=team, mu_best=mu_best,
                               pilot_records=pilot)
        s_star, ci = calibrate_s_star(inp, seed=seed)
        regime = classify_regimes(s_star, ci, pilot_selector_s_hats(inp))
    except GenselectError as e:
        _warn(f"regime classification skipped: {e}")

    bundle = build_report(
        artifact, decoupled=decoupled,
        cost_table=cfg.cost_table or None, regime=regime)
    written = write_report(bundle, args.out)
    _emit_json({"out": str(args.out), "files": written}, None)
    return EXIT_OK


# ------------------------------------------------------------ wiring

def _add_config(p):
    p.add_argument("--config", help="experiment config JSON "
                   "(default: bundled mock config)")


def _add_seed(p):
    p.add_argument("--seed", type=int, help="override the config seed")


def _add_out(p, help_text):
    p.add_argument("--out", help=help_text)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="genselect",
                     description="selection-bottleneck experiment pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="quality-model sweep to CSV")
    _add_config(p)
    _add_seed(p)
    _add_out(p, "CSV path (default: stdout)")
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--trials", type=int, default=100_000)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("run", help="run the harness experiment")
    _add_config(p)
    _add_seed(p)
    p.add_argument("--artifact", required=True, help="output artifact directory")
    p.add_argument("--backend", choices=("mock", "live"))
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("score", help="Bradley-Terry fit over an artifact")
    p.add_argument("--artifact", required=True)
    _add_out(p, "JSON path (default: stdout)")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("stats", help="confirmatory and exploratory analyses")
    p.add_argument("--artifact", required=True)
    _add_out(p, "JSON path (default: stdout)")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("calibrate", help="estimate the crossover threshold")
    _add_config(p)
    _add_seed(p)
    p.add_argument("--artifact", required=True)
    p.add_argument("--bootstrap", type=int, default=1000)
    _add_out(p, "JSON path (default: stdout)")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("report", help="render Markdown + CSV tables")
    _add_config(p)
    _add_seed(p)
    p.add_argument("--artifact", required=True)
    p.add_argument("--backend", choices=("mock", "live"))
    p.add_argument("--out", required=True, help="report output directory")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except ConfigError as e:
        print(json.dumps({"error": "ConfigError", "message": str(e)}),
              file=sys.stderr)
        return EXIT_CONFIG
    except ArtifactError as e:
        print(json.dumps({"error": "ArtifactError", "message": str(e)}),
              file=sys.stderr)
        return EXIT_ARTIFACT
    except GenselectError as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}),
              file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as e:  # pragma: no cover - defensive
        print(json.dumps({"error": type(e).__name__, "message": str(e)}),
              file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
