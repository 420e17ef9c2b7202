"""Report assembly: tables, per-task forest data, and regime classification.

Everything here is a pure function of an artifact (plus optional decoupled /
cost / regime inputs): the same artifact always renders byte-identical
output, and every number in a rendered table is the direct output of the
operation that owns it (win rates from the BT fit, coefficients from the
regression, tallies from the sign test), so reports can be audited by
recomputation.  Markdown is for humans; the CSVs are plot-ready data files.
"""

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.special import ndtri, stdtrit

from .btscore import cohen_kappa
from .calibration import (
    ANCHOR_ORACLE,
    ANCHOR_RANDOM,
    CalibrationInput,
    RegimeReport,
    calibrate_s_star,
    classify_regimes,
    pilot_selector_s_hats,
)
from .errors import GenselectError
from .harness import (
    ExperimentArtifact,
    bt_win_rate_table,
    cost_summary,
    task_win_rates,
)
from .quality import Team
from .stats import (
    DesignMatrixSpec,
    clopper_pearson,
    ols_hc3,
    random_intercept_fit,
    sign_test,
)

Z975 = float(ndtri(0.975))


@dataclass(frozen=True)
class ForestRow:
    task_id: str
    delta: float
    lo: float
    hi: float


@dataclass(frozen=True)
class ForestResult:
    """Per-task win-rate differences between two cells, with a sign tally."""

    cell_a: str
    cell_b: str
    rows: tuple[ForestRow, ...]
    positives: int
    ties: int
    negatives: int
    sign_p: float
    share_ci: tuple[float, float]


def _judge_scores(record) -> dict[str, float]:
    """Per-judge consensus score for one record: win 1, tie 0.5, loss 0."""
    out = {}
    cid = record.consensus["candidate_id"]
    for v in record.eval_verdicts:
        if v["outcome"] == "tie":
            score = 0.5
        else:
            score = 1.0 if (v["outcome"] == "a_wins") == (v["item_a"] == cid) else 0.0
        out[v["judge_id"]] = score
    return out


def _delta_ci(scores_a: dict, scores_b: dict, delta: float) -> tuple[float, float]:
    shared = sorted(set(scores_a) & set(scores_b))
    if len(shared) >= 2:
        diffs = np.array([scores_a[j] - scores_b[j] for j in shared])
        sd = float(diffs.std(ddof=1))
        if sd == 0.0:
            return delta, delta
        half = float(stdtrit(len(shared) - 1, 0.975)) * sd / math.sqrt(len(shared))
        mean = float(diffs.mean())
        return mean - half, mean + half
    return delta, delta  # disjoint panels carry no paired uncertainty estimate


def build_forest(artifact: ExperimentArtifact, cell_a: str,
                 cell_b: str) -> ForestResult:
    """Fig. 3-style per-task advantage of cell_a over cell_b."""
    records = {(r.cell, r.task_id): r for r in artifact.records if not r.failed}
    wr = task_win_rates(artifact.records)
    tasks = sorted({t for c, t in wr})
    missing = [t for t in tasks
               if (cell_a, t) not in wr or (cell_b, t) not in wr]
    if missing:
        raise GenselectError(
            f"tasks without both cells {cell_a!r} and {cell_b!r}: {missing}")
    if not tasks:
        raise GenselectError("artifact has no scored tasks")

    rows = []
    pos = neg = tie = 0
    for t in tasks:
        delta = wr[(cell_a, t)] - wr[(cell_b, t)]
        lo, hi = _delta_ci(_judge_scores(records[(cell_a, t)]),
                           _judge_scores(records[(cell_b, t)]), delta)
        rows.append(ForestRow(task_id=t, delta=delta, lo=lo, hi=hi))
        if delta > 0:
            pos += 1
        elif delta < 0:
            neg += 1
        else:
            tie += 1
    # all-tie comparisons (e.g. a cell against itself) carry no sign evidence
    p = sign_test(pos, neg).p_value if pos + neg > 0 else 1.0
    ci = clopper_pearson(pos, len(tasks))
    return ForestResult(cell_a=cell_a, cell_b=cell_b, rows=tuple(rows),
                        positives=pos, ties=tie, negatives=neg,
                        sign_p=p, share_ci=ci)


def build_cell_table(records) -> tuple[dict, ...]:
    """Per-cell mean task win rate with a normal CI, plus the BT win rate."""
    wr = task_win_rates(records)
    bt = bt_win_rate_table(records)
    by_cell: dict[str, list[float]] = {}
    for (cell, _task), v in wr.items():
        by_cell.setdefault(cell, []).append(v)
    rows = []
    for cell in sorted(by_cell):
        vals = np.array(by_cell[cell])
        mean = float(vals.mean())
        sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        half = Z975 * sd / math.sqrt(vals.size) if vals.size > 1 else 0.0
        rows.append({"cell": cell, "n_tasks": int(vals.size), "mean_wr": mean,
                     "sd": sd, "ci_lo": mean - half, "ci_hi": mean + half,
                     "bt_wr": bt[cell]})
    return tuple(rows)


def build_regression_table(records, reference: str) -> dict:
    """Cell-dummy OLS with HC3 errors plus the random-intercept check."""
    wr = task_win_rates(records)
    cells = sorted({c for c, _ in wr})
    if reference not in cells:
        raise GenselectError(f"reference cell {reference!r} not in artifact")
    ordered = (reference,) + tuple(c for c in cells if c != reference)
    spec = DesignMatrixSpec(
        cells=ordered, reference=reference,
        observations=tuple((c, t, v) for (c, t), v in sorted(wr.items())))
    return {"reference": reference, "ols": ols_hc3(spec),
            "mixed": random_intercept_fit(spec)}


def build_judge_table(records) -> tuple[dict, ...]:
    """Per evaluation judge: verdict count, consensus score, tie rate, kappa."""
    outcomes: dict[str, dict[tuple, str]] = {}
    scores: dict[str, list[float]] = {}
    for r in records:
        if r.failed:
            continue
        per_judge = _judge_scores(r)
        for v in r.eval_verdicts:
            j = v["judge_id"]
            outcomes.setdefault(j, {})[(r.cell, r.task_id)] = v["outcome"]
            scores.setdefault(j, []).append(per_judge[j])
    rows = []
    judges = sorted(outcomes)
    for j in judges:
        mine = outcomes[j]
        kappas = []
        for other in judges:
            if other == j:
                continue
            shared = sorted(set(mine) & set(outcomes[other]))
            if shared:
                kappas.append(cohen_kappa([mine[k] for k in shared],
                                          [outcomes[other][k] for k in shared]))
        ties = sum(o == "tie" for o in mine.values())
        rows.append({
            "judge": j,
            "verdicts": len(mine),
            "consensus_score": float(np.mean(scores[j])),
            "tie_rate": ties / len(mine),
            "mean_kappa": float(np.mean(kappas)) if kappas else float("nan"),
        })
    return tuple(rows)


def build_decoupled_table(records, decoupled) -> tuple[dict, ...]:
    """Table 4-style: original panel vs independent full and sub panels."""
    original = bt_win_rate_table(records)
    rows = []
    for cell in sorted(original):
        rows.append({"cell": cell, "original": original[cell],
                     "full_panel": decoupled.full_panel.get(cell, float("nan")),
                     "sub_panel": decoupled.sub_panel.get(cell, float("nan"))})
    return tuple(rows)


def build_cost_table(artifact: ExperimentArtifact,
                     cost_table: Mapping[str, float]) -> tuple[dict, ...]:
    summary = cost_summary(artifact, cost_table)
    return tuple({"cell": cell, **row} for cell, row in summary.items())


def pilot_from_artifact(artifact: ExperimentArtifact, seed: int,
                        ) -> tuple[tuple[str, float], ...]:
    """Extract calibration pilot records from a mock artifact's latents.

    Anchors come from each record's candidate pool (uniform pick and max);
    each cell contributes its consensus latent under its own label.  Only
    pools with at least two distinct agents count: a homogeneous cell has no
    selection spread, it is the comparison point, not a selector.  Live
    artifacts carry no latents, so calibration on them is refused: win-rate
    and latent-quality scales are not interchangeable.
    """
    rng = np.random.default_rng([seed, 0xCA11])
    records: list[tuple[str, float]] = []
    for r in artifact.records:
        if r.failed:
            continue
        latents = [c.get("latent_quality") for c in r.candidates]
        consensus = r.consensus.get("latent_quality")
        if consensus is None or any(q is None for q in latents):
            raise GenselectError(
                "artifact has no latent qualities; live-mode calibration is "
                "scale-dependent and not supported")
        if len({c["agent_id"] for c in r.candidates}) < 2:
            continue
        records.append((ANCHOR_RANDOM, float(latents[rng.integers(len(latents))])))
        records.append((ANCHOR_ORACLE, float(max(latents))))
        records.append((r.cell, float(consensus)))
    if not records:
        raise GenselectError("artifact has no diverse-pool records")
    return tuple(records)


def build_regime_report(artifact: ExperimentArtifact, team: Team,
                        mu_best: float, seed: int, *,
                        b_bootstrap: int = 1000) -> RegimeReport:
    """Calibrate s* against the artifact-derived pilot and classify cells."""
    pilot = pilot_from_artifact(artifact, seed)
    inp = CalibrationInput(team=team, mu_best=mu_best, pilot_records=pilot,
                           b_bootstrap=b_bootstrap)
    s_star, ci = calibrate_s_star(inp, seed=seed)
    return classify_regimes(s_star, ci, pilot_selector_s_hats(inp))


@dataclass(frozen=True)
class ReportBundle:
    cell_table: tuple[dict, ...]
    regression_table: dict
    judge_table: tuple[dict, ...]
    forest: ForestResult
    decoupled_table: Optional[tuple[dict, ...]] = None
    cost_table: Optional[tuple[dict, ...]] = None
    regime: Optional[RegimeReport] = None


def build_report(artifact: ExperimentArtifact, *,
                 forest_cells: Optional[tuple[str, str]] = None,
                 reference: Optional[str] = None,
                 decoupled=None,
                 cost_table: Optional[Mapping[str, float]] = None,
                 regime: Optional[RegimeReport] = None) -> ReportBundle:
    """Assemble every table the artifact supports.

    The forest defaults to (second cell, first cell) in manifest order; the
    regression reference defaults to the first cell, which the bundled
    config makes the homogeneous one.
    """
    cells = [c.name for c in artifact.cells()]
    if reference is None:
        reference = cells[0]
    if forest_cells is None:
        if len(cells) < 2:
            raise GenselectError("forest needs two cells")
        forest_cells = (cells[1], cells[0])
    return ReportBundle(
        cell_table=build_cell_table(artifact.records),
        regression_table=build_regression_table(artifact.records, reference),
        judge_table=build_judge_table(artifact.records),
        forest=build_forest(artifact, *forest_cells),
        decoupled_table=(build_decoupled_table(artifact.records, decoupled)
                         if decoupled is not None else None),
        cost_table=(build_cost_table(artifact, cost_table)
                    if cost_table is not None else None),
        regime=regime,
    )


# ------------------------------------------------------------ rendering

def _f(x: float) -> str:
    return f"{x:.3f}"


def _p(x: float) -> str:
    return f"{x:.3g}"


def _md_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |",
             "| " + " | ".join("---" for _ in header) + " |"]
    lines.extend("| " + " | ".join(row) + " |" for row in rows)
    return "\n".join(lines)


def render_markdown(bundle: ReportBundle) -> str:
    parts = ["# Experiment report", ""]

    parts.append("## Cell summary")
    parts.append(_md_table(
        ["cell", "tasks", "mean WR", "95% CI", "BT-WR"],
        [[r["cell"], str(r["n_tasks"]), _f(r["mean_wr"]),
          f"[{_f(r['ci_lo'])}, {_f(r['ci_hi'])}]", _f(r["bt_wr"])]
         for r in bundle.cell_table]))
    parts.append("")

    reg = bundle.regression_table
    ols, mixed = reg["ols"], reg["mixed"]
    parts.append(f"## Regression (reference: {reg['reference']})")
    parts.append(_md_table(
        ["term", "estimate", "HC3 SE", "p", "REML estimate"],
        [[name, _f(ols.coefficients[name]), _f(ols.hc3_se[name]),
          _p(ols.p_values[name]), _f(mixed.coefficients[name])]
         for name in ols.coefficients]))
    parts.append("")
    parts.append(f"R² = {_f(ols.r_squared)}, robust Wald F = {_f(ols.f_stat)} "
                 f"(p = {_p(ols.f_p_value)}); "
                 f"task variance = {_f(mixed.group_variance)}, "
                 f"residual variance = {_f(mixed.residual_variance)}")
    parts.append("")

    parts.append("## Evaluation judges")
    parts.append(_md_table(
        ["judge", "verdicts", "consensus score", "tie rate", "mean kappa"],
        [[r["judge"], str(r["verdicts"]), _f(r["consensus_score"]),
          _f(r["tie_rate"]), _f(r["mean_kappa"])]
         for r in bundle.judge_table]))
    parts.append("")

    forest = bundle.forest
    parts.append(f"## Per-task advantage: {forest.cell_a} vs {forest.cell_b}")
    parts.append(
        f"{forest.positives} positive, {forest.ties} tie, "
        f"{forest.negatives} negative of {len(forest.rows)} tasks; "
        f"sign test p = {_p(forest.sign_p)}; positive-share 95% CI "
        f"[{_f(forest.share_ci[0])}, {_f(forest.share_ci[1])}]")
    parts.append("")
    parts.append(_md_table(
        ["task", "delta", "95% CI"],
        [[r.task_id, _f(r.delta), f"[{_f(r.lo)}, {_f(r.hi)}]"]
         for r in forest.rows]))
    parts.append("")

    if bundle.decoupled_table is not None:
        parts.append("## Decoupled evaluation")
        parts.append(_md_table(
            ["cell", "original", "independent full", "independent sub"],
            [[r["cell"], _f(r["original"]), _f(r["full_panel"]),
              _f(r["sub_panel"])] for r in bundle.decoupled_table]))
        parts.append("")

    if bundle.cost_table is not None:
        parts.append("## Cost")
        parts.append(_md_table(
            ["cell", "relative cost", "total", "calls", "BT-WR"],
            [[r["cell"], _f(r["relative_cost"]), _f(r["total_cost"]),
              str(r["calls"]),
              _f(r["bt_win_rate"] if r["bt_win_rate"] is not None
                 else float("nan"))]
             for r in bundle.cost_table]))
        parts.append("")

    if bundle.regime is not None:
        regime = bundle.regime
        parts.append("## Operating regimes")
        parts.append(f"s* = {_f(regime.s_star)}, 95% CI "
                     f"[{_f(regime.ci[0])}, {_f(regime.ci[1])}]")
        parts.append("")
        parts.append(_md_table(
            ["selector", "s-hat", "regime"],
            [[label, _f(s_hat), regime_label]
             for label, (s_hat, regime_label) in sorted(regime.per_selector.items())]))
        parts.append("")

    return "\n".join(parts)


def _csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def render_csv(bundle: ReportBundle) -> dict[str, str]:
    files = {}
    files["cell_table.csv"] = _csv(
        ["cell", "n_tasks", "mean_wr", "sd", "ci_lo", "ci_hi", "bt_wr"],
        [[r["cell"], r["n_tasks"], _f(r["mean_wr"]), _f(r["sd"]),
          _f(r["ci_lo"]), _f(r["ci_hi"]), _f(r["bt_wr"])]
         for r in bundle.cell_table])

    ols, mixed = bundle.regression_table["ols"], bundle.regression_table["mixed"]
    files["regression_table.csv"] = _csv(
        ["term", "estimate", "hc3_se", "p", "reml_estimate"],
        [[name, _f(ols.coefficients[name]), _f(ols.hc3_se[name]),
          _p(ols.p_values[name]), _f(mixed.coefficients[name])]
         for name in ols.coefficients])

    files["judge_table.csv"] = _csv(
        ["judge", "verdicts", "consensus_score", "tie_rate", "mean_kappa"],
        [[r["judge"], r["verdicts"], _f(r["consensus_score"]),
          _f(r["tie_rate"]), _f(r["mean_kappa"])] for r in bundle.judge_table])

    forest = bundle.forest
    files["forest.csv"] = _csv(
        ["task_id", "delta", "ci_lo", "ci_hi"],
        [[r.task_id, _f(r.delta), _f(r.lo), _f(r.hi)] for r in forest.rows])

    if bundle.decoupled_table is not None:
        files["decoupled_table.csv"] = _csv(
            ["cell", "original", "full_panel", "sub_panel"],
            [[r["cell"], _f(r["original"]), _f(r["full_panel"]),
              _f(r["sub_panel"])] for r in bundle.decoupled_table])

    if bundle.cost_table is not None:
        files["cost_table.csv"] = _csv(
            ["cell", "relative_cost", "total_cost", "calls", "bt_win_rate"],
            [[r["cell"], _f(r["relative_cost"]), _f(r["total_cost"]),
              r["calls"],
              _f(r["bt_win_rate"] if r["bt_win_rate"] is not None
                 else float("nan"))]
             for r in bundle.cost_table])

    if bundle.regime is not None:
        regime = bundle.regime
        files["regime.csv"] = _csv(
            ["selector", "s_hat", "regime", "s_star", "ci_lo", "ci_hi"],
            [[label, _f(s_hat), regime_label, _f(regime.s_star),
              _f(regime.ci[0]), _f(regime.ci[1])]
             for label, (s_hat, regime_label) in sorted(regime.per_selector.items())])

    return files


def write_report(bundle: ReportBundle, out_dir) -> list[str]:
    """Write report.md plus the CSV tables; returns the written names."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    (out / "report.md").write_text(render_markdown(bundle), encoding="utf-8")
    written.append("report.md")
    for name, content in render_csv(bundle).items():
        (out / name).write_text(content, encoding="utf-8")
        written.append(name)
    return written
