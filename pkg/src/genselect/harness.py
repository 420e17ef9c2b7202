"""Experiment orchestration: cells, tasks, runs, persistence, evaluation.

A run walks every (cell, task) pair: each agent generates one candidate, the
cell's selector picks (or synthesizes) a consensus output, a shared baseline
is produced from a single-model pool, and an evaluation panel judges
consensus against baseline.  Everything is keyed so that a rerun with the
same (config, seed) reproduces identical records: per-task seeds derive from
(seed, task_id), and backend runs are tokenized so the baseline's draws are
shared across cells while cell work stays independent.

Records persist as schema-versioned JSONL next to a JSON manifest; loading
validates the schema major, reports corrupt lines by number, and warns on
unknown optional fields instead of failing.
"""

import hashlib
import itertools
import json
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .backends import BackendInterface, parse_quality_text
from .btscore import (
    BTConfig,
    JudgeDiagnostics,
    PairwiseVerdict,
    bt_win_rate,
    fit_bt,
    judge_diagnostics,
)
from .errors import ArtifactError, GenselectError, SeparationError
from .selectors import (
    BlendParams,
    Candidate,
    CandidatePool,
    SelectorSpec,
    candidate_text,
    judge_panel_select,
    majority_vote,
    select_noisy_argmax,
    select_oracle,
    select_random,
    synthesize,
)

SCHEMA_VERSION = "1.0"

CATEGORIES = ("coding", "creative_extended", "ethics_policy", "math_logic",
              "reasoning", "science", "summarization")

# Purposes that count as pipeline cost; baseline and evaluation calls are
# shared overhead, not a property of the cell's mechanism.
COSTED_PURPOSES = frozenset({"generate", "select_judge", "vote", "synthesize"})


@dataclass(frozen=True)
class CellSpec:
    """One experimental condition: a team of agents plus an aggregation rule.

    judge_models double as the evaluation panel for every cell; they are the
    selection panel too when the selector is judge_panel.
    """

    name: str
    agent_models: tuple[str, ...]
    selector: SelectorSpec
    judge_models: tuple[str, ...] = ()
    synthesizer_model: Optional[str] = None
    exclude_synthesizer_from_eval: bool = False

    def __post_init__(self):
        object.__setattr__(self, "agent_models", tuple(self.agent_models))
        object.__setattr__(self, "judge_models", tuple(self.judge_models))
        if not self.name:
            raise GenselectError("cell name must be nonempty")
        if not self.agent_models:
            raise GenselectError(f"cell {self.name!r} has no agents")
        if self.selector.mechanism == "synthesis" and not self.synthesizer_model:
            raise GenselectError(
                f"cell {self.name!r} uses synthesis but names no synthesizer_model")

    def eval_judges(self) -> tuple[str, ...]:
        if self.exclude_synthesizer_from_eval and self.synthesizer_model:
            return tuple(j for j in self.judge_models if j != self.synthesizer_model)
        return self.judge_models

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "agent_models": list(self.agent_models),
            "selector": {"mechanism": self.selector.mechanism,
                         "params": dict(self.selector.params)},
            "judge_models": list(self.judge_models),
            "synthesizer_model": self.synthesizer_model,
            "exclude_synthesizer_from_eval": self.exclude_synthesizer_from_eval,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CellSpec":
        return cls(
            name=d["name"],
            agent_models=tuple(d["agent_models"]),
            selector=SelectorSpec(d["selector"]["mechanism"],
                                  d["selector"].get("params", {})),
            judge_models=tuple(d.get("judge_models", ())),
            synthesizer_model=d.get("synthesizer_model"),
            exclude_synthesizer_from_eval=bool(
                d.get("exclude_synthesizer_from_eval", False)),
        )


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    category: str
    prompt: str
    rubric: str = ""

    def __post_init__(self):
        if not self.task_id:
            raise GenselectError("task_id must be nonempty")
        if self.category not in CATEGORIES:
            raise GenselectError(
                f"category {self.category!r} not one of {CATEGORIES}")

    def to_dict(self) -> dict:
        return {"task_id": self.task_id, "category": self.category,
                "prompt": self.prompt, "rubric": self.rubric}


_BATTERY_TEMPLATES = {
    "coding": [
        "Write a function that merges overlapping intervals.",
        "Implement an LRU cache with O(1) operations.",
        "Find the longest common subsequence of two strings.",
        "Parse a CSV line handling quoted fields and escapes.",
        "Detect a cycle in a directed graph.",
        "Serialize and deserialize a binary tree.",
    ],
    "creative_extended": [
        "Write a short story told from the view of a lighthouse keeper.",
        "Compose a dialogue between two rival cartographers.",
        "Write a letter from a city to its founders, centuries later.",
        "Draft the opening chapter of a mystery set on a research ship.",
        "Write a fable explaining why rivers meander.",
        "Describe a marketplace using only sound and smell.",
    ],
    "ethics_policy": [
        "Weigh the tradeoffs of congestion pricing in dense cities.",
        "Should juries see a defendant's algorithmic risk score? Argue both sides.",
        "Design a fair allocation policy for scarce vaccine doses.",
        "Discuss obligations to future generations in climate policy.",
        "When may a company ethically use behavioral nudges?",
        "Evaluate mandatory disclosure of salary ranges in job postings.",
    ],
    "math_logic": [
        "Prove that the sum of two odd integers is even.",
        "How many ways can 8 rooks be placed peacefully on a chessboard?",
        "Solve: if 3x + 7 = 2x - 4, find x, then verify.",
        "A liar and a truth-teller guard two doors; derive the single question.",
        "Show that sqrt(2) is irrational.",
        "Count the lattice paths from (0,0) to (4,4) avoiding (2,2).",
    ],
    "reasoning": [
        "A farmer must ferry a wolf, a goat, and a cabbage; plan the crossings.",
        "Three switches control a bulb upstairs; find the mapping in one trip.",
        "Order five runners given partial pairwise results.",
        "Infer the seating chart from a set of adjacency clues.",
        "Diagnose why a kettle trips the breaker only on cold mornings.",
        "Decide which of four suspects is lying from their statements.",
    ],
    "science": [
        "Explain why the sky is blue and sunsets are red.",
        "Describe how mRNA vaccines trigger immunity.",
        "Why do ice skates glide? Evaluate the competing explanations.",
        "Explain plate tectonics evidence from seafloor magnetization.",
        "How does a heat pump move heat against the gradient?",
        "Why can't we breathe liquid water despite its oxygen content?",
    ],
    "summarization": [
        "Summarize the history of the metric system in one paragraph.",
        "Condense the plot of a three-act play into five sentences.",
        "Summarize the arguments for and against daylight saving time.",
        "Write an abstract for a study on urban tree canopy and heat.",
        "Reduce a week of project updates into a status email.",
        "Summarize how double-entry bookkeeping works for a novice.",
    ],
}


def synthetic_battery() -> tuple[TaskSpec, ...]:
    """A 42-task battery, six generic prompts per category."""
    tasks = []
    for cat in CATEGORIES:
        for i, prompt in enumerate(_BATTERY_TEMPLATES[cat]):
            tasks.append(TaskSpec(task_id=f"{cat}-{i:02d}", category=cat,
                                  prompt=prompt,
                                  rubric="Accuracy, completeness, and clarity."))
    return tuple(tasks)


def save_tasks(tasks: Sequence[TaskSpec], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in tasks:
            fh.write(json.dumps(t.to_dict(), sort_keys=True) + "\n")


def load_tasks(path) -> tuple[TaskSpec, ...]:
    tasks = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                tasks.append(TaskSpec(task_id=d["task_id"], category=d["category"],
                                      prompt=d["prompt"], rubric=d.get("rubric", "")))
            except (json.JSONDecodeError, KeyError) as e:
                raise ArtifactError(f"corrupt task at line {lineno}: {e}") from None
    ids = [t.task_id for t in tasks]
    if len(set(ids)) != len(ids):
        raise GenselectError("duplicate task ids in battery")
    return tuple(tasks)


def _family(model_id: str) -> str:
    return model_id.split("-", 1)[0]


@dataclass(frozen=True)
class SeparationReport:
    ok: bool
    violations: tuple[str, ...]
    warnings: tuple[str, ...]


def validate_separation(cell: CellSpec) -> SeparationReport:
    """Zero-overlap check: hard violations plus same-family warnings."""
    violations = []
    warns = []
    agents = set(cell.agent_models)
    judges = set(cell.judge_models)
    overlap = sorted(agents & judges)
    if overlap:
        violations.append(f"models in both agent and judge pools: {overlap}")
    if cell.synthesizer_model in agents:
        violations.append(f"synthesizer {cell.synthesizer_model!r} is also an agent")
    if cell.selector.mechanism == "judge_panel" and not cell.judge_models:
        violations.append("judge_panel selector with an empty judge list")
    agent_families = {_family(m) for m in agents}
    for judge in sorted(judges - agents):
        if _family(judge) in agent_families:
            warns.append(f"judge {judge!r} shares a family with an agent")
    if cell.synthesizer_model and cell.synthesizer_model in judges:
        warns.append(f"synthesizer {cell.synthesizer_model!r} also sits on "
                     "the evaluation panel")
    return SeparationReport(ok=not violations, violations=tuple(violations),
                            warnings=tuple(warns))


@dataclass(frozen=True)
class RunRecord:
    """Everything one (cell, task) run produced, ready for re-analysis.

    Candidate and baseline texts are retained verbatim so independent judges
    can re-score stored pairs without touching the generation backend.
    """

    cell: str
    task_id: str
    seed: int
    task: dict = field(default_factory=dict)
    candidates: tuple[dict, ...] = ()
    selection: dict = field(default_factory=dict)
    selection_verdicts: tuple[dict, ...] = ()
    consensus: dict = field(default_factory=dict)
    baseline: dict = field(default_factory=dict)
    eval_verdicts: tuple[dict, ...] = ()
    calls: tuple[dict, ...] = ()
    failed: bool = False
    error: str = ""
    schema: str = SCHEMA_VERSION
    created_at: str = field(default="", compare=False)

    def to_dict(self) -> dict:
        return {
            "schema": self.schema,
            "cell": self.cell,
            "task_id": self.task_id,
            "seed": self.seed,
            "task": self.task,
            "candidates": list(self.candidates),
            "selection": self.selection,
            "selection_verdicts": list(self.selection_verdicts),
            "consensus": self.consensus,
            "baseline": self.baseline,
            "eval_verdicts": list(self.eval_verdicts),
            "calls": list(self.calls),
            "failed": self.failed,
            "error": self.error,
            "created_at": self.created_at,
        }

    _REQUIRED = ("schema", "cell", "task_id", "seed")

    @classmethod
    def from_dict(cls, d: Mapping, lineno: Optional[int] = None) -> "RunRecord":
        where = f" at line {lineno}" if lineno is not None else ""
        for key in cls._REQUIRED:
            if key not in d:
                raise ArtifactError(f"record missing {key!r}{where}")
        major = str(d["schema"]).split(".", 1)[0]
        if major != SCHEMA_VERSION.split(".", 1)[0]:
            raise ArtifactError(
                f"unsupported schema {d['schema']!r}{where}; this reader "
                f"handles major {SCHEMA_VERSION.split('.', 1)[0]}")
        known = {"schema", "cell", "task_id", "seed", "task", "candidates",
                 "selection", "selection_verdicts", "consensus", "baseline",
                 "eval_verdicts", "calls", "failed", "error", "created_at"}
        unknown = sorted(set(d) - known)
        if unknown:
            warnings.warn(f"ignoring unknown record field(s) {unknown}{where}",
                          UserWarning, stacklevel=2)
        return cls(
            cell=d["cell"], task_id=d["task_id"], seed=int(d["seed"]),
            task=dict(d.get("task", {})),
            candidates=tuple(d.get("candidates", ())),
            selection=dict(d.get("selection", {})),
            selection_verdicts=tuple(d.get("selection_verdicts", ())),
            consensus=dict(d.get("consensus", {})),
            baseline=dict(d.get("baseline", {})),
            eval_verdicts=tuple(d.get("eval_verdicts", ())),
            calls=tuple(d.get("calls", ())),
            failed=bool(d.get("failed", False)),
            error=str(d.get("error", "")),
            schema=str(d["schema"]),
            created_at=str(d.get("created_at", "")),
        )


def persist_records(records: Sequence[RunRecord], path) -> None:
    """Write records as JSONL in canonical (cell, task) order."""
    ordered = sorted(records, key=lambda r: (r.cell, r.task_id))
    with open(path, "w", encoding="utf-8") as fh:
        for r in ordered:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def load_records(path) -> tuple[RunRecord, ...]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as e:
                raise ArtifactError(f"corrupt record at line {lineno}: {e}") from None
            records.append(RunRecord.from_dict(d, lineno=lineno))
    return tuple(records)


def _derive_seed(*parts) -> int:
    key = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big") >> 1


def _verdict_to_dict(v: PairwiseVerdict) -> dict:
    return {"judge_id": v.judge_id, "item_a": v.item_a, "item_b": v.item_b,
            "outcome": v.outcome, "presented_first": v.presented_first,
            "task_id": v.task_id}


def _verdict_from_dict(d: Mapping) -> PairwiseVerdict:
    return PairwiseVerdict(judge_id=d["judge_id"], item_a=d["item_a"],
                           item_b=d["item_b"], outcome=d["outcome"],
                           presented_first=d["presented_first"],
                           task_id=d.get("task_id", ""))


def _candidate_to_dict(c: Candidate) -> dict:
    return {"candidate_id": c.candidate_id, "agent_id": c.agent_id,
            "latent_quality": c.latent_quality, "text": candidate_text(c)}


def _marked_prompt(task: TaskSpec) -> str:
    return f"[category:{task.category}] {task.prompt}"


def _begin(backend, token: str) -> None:
    begin = getattr(backend, "begin_run", None)
    if begin is not None:
        begin(token)


def _generate_pool(backend, models, task, temperature, id_prefix, calls, purpose):
    cands = []
    for k, model in enumerate(models):
        text = backend.generate(model, _marked_prompt(task), temperature)
        calls.append({"model_id": model, "purpose": purpose})
        try:
            latent = parse_quality_text(text)
        except GenselectError:
            latent = None
        cands.append(Candidate(candidate_id=f"{task.task_id}:{id_prefix}{k}",
                               agent_id=model, latent_quality=latent,
                               payload=text, task_id=task.task_id))
    return CandidatePool(task.task_id, tuple(cands))


def _judge_single_pair(backend, judges, task, item_a: Candidate, item_b: Candidate,
                       seed_parts, temperature, calls, purpose):
    """One candidate pair judged by a panel, presentation randomized per judge."""
    verdicts = []
    for judge in sorted(judges):
        rng = np.random.default_rng([_derive_seed(*seed_parts, judge)])
        a_first = bool(rng.random() < 0.5)
        first, second = (item_a, item_b) if a_first else (item_b, item_a)
        raw = backend.judge_pair(judge, _marked_prompt(task), task.rubric,
                                 candidate_text(first), candidate_text(second),
                                 temperature)
        calls.append({"model_id": judge, "purpose": purpose})
        if raw == "tie":
            outcome = "tie"
        else:
            first_wins = raw == "first"
            outcome = "a_wins" if first_wins == a_first else "b_wins"
        verdicts.append(PairwiseVerdict(
            judge_id=judge, item_a=item_a.candidate_id, item_b=item_b.candidate_id,
            outcome=outcome, presented_first=first.candidate_id,
            task_id=task.task_id))
    return verdicts


def _select_baseline(backend, cell, task, baseline_model, baseline_pool,
                     seed, gen_temperature, judge_temperature, calls):
    """Best-of-pool single-model baseline, shared across cells by run token."""
    _begin(backend, f"{seed}:{task.task_id}:baseline")
    pool = _generate_pool(backend, [baseline_model] * baseline_pool, task,
                          gen_temperature, "baseline", calls, "baseline_generate")
    if baseline_pool == 1 or not cell.judge_models:
        return pool.candidates[0]
    outcome = judge_panel_select(
        pool, list(cell.judge_models), backend, _derive_seed(seed, task.task_id, "baseline"),
        prompt=_marked_prompt(task), rubric=task.rubric, temperature=judge_temperature)
    calls.extend({"model_id": v.judge_id, "purpose": "baseline_select"}
                 for v in outcome.audit)
    return outcome.selected(pool)


def _apply_selector(backend, cell, pool, task, task_seed, judge_temperature, calls):
    spec = cell.selector
    if spec.mechanism == "random":
        return select_random(pool, task_seed)
    if spec.mechanism == "oracle":
        return select_oracle(pool)
    if spec.mechanism == "noisy_argmax":
        return select_noisy_argmax(pool, float(spec.params.get("noise_sigma", 0.0)),
                                   task_seed)
    if spec.mechanism == "majority_vote":
        sigma = float(spec.params.get("voter_sigma", 0.0))
        qs = pool.latent_qualities()
        votes = []
        for v_idx, voter in enumerate(cell.agent_models):
            rng = np.random.default_rng([task_seed, 7, v_idx])
            perceived = qs + (rng.normal(0.0, sigma, pool.n) if sigma > 0 else 0.0)
            votes.append((voter, int(np.argmax(perceived))))
            calls.append({"model_id": voter, "purpose": "vote"})
        return majority_vote(pool, votes, task_seed)
    if spec.mechanism == "judge_panel":
        outcome = judge_panel_select(
            pool, list(cell.judge_models), backend, task_seed,
            prompt=_marked_prompt(task), rubric=task.rubric,
            temperature=judge_temperature)
        calls.extend({"model_id": v.judge_id, "purpose": "select_judge"}
                     for v in outcome.audit)
        return outcome
    if spec.mechanism == "synthesis":
        blend = BlendParams(
            weights=spec.params.get("weights"),
            incoherence_lambda=float(spec.params.get("incoherence_lambda", 0.0)))
        outcome = synthesize(pool, blend, backend=backend,
                             synthesizer_model=cell.synthesizer_model,
                             prompt=_marked_prompt(task))
        calls.append({"model_id": cell.synthesizer_model, "purpose": "synthesize"})
        return outcome
    raise GenselectError(f"unknown mechanism {spec.mechanism!r}")


def run_cell(cell: CellSpec, tasks: Sequence[TaskSpec], backend: BackendInterface,
             seed: int, *, baseline_model: str, baseline_pool: int = 3,
             gen_temperature: float = 0.7, judge_temperature: float = 0.1,
             max_failure_rate: float = 0.2) -> list[RunRecord]:
    """Execute one cell over a task battery.

    Backend failures mark the record failed and the run continues until the
    failure budget is exceeded, at which point the whole cell aborts.
    """
    report = validate_separation(cell)
    if not report.ok:
        raise SeparationError(
            f"cell {cell.name!r} fails separation: {'; '.join(report.violations)}")
    if not cell.eval_judges():
        raise GenselectError(f"cell {cell.name!r} has no evaluation judges")
    if not tasks:
        raise GenselectError("no tasks")

    records = []
    failures = 0
    budget = max_failure_rate * len(tasks)
    for task in tasks:
        task_seed = _derive_seed(seed, task.task_id, cell.name)
        task_info = {"category": task.category, "prompt": task.prompt,
                     "rubric": task.rubric}
        calls: list[dict] = []
        try:
            baseline = _select_baseline(backend, cell, task, baseline_model,
                                        baseline_pool, seed, gen_temperature,
                                        judge_temperature, calls)

            _begin(backend, f"{seed}:{task.task_id}:{cell.name}")
            pool = _generate_pool(backend, cell.agent_models, task,
                                  gen_temperature, "c", calls, "generate")
            outcome = _apply_selector(backend, cell, pool, task, task_seed,
                                      judge_temperature, calls)
            consensus = outcome.selected(pool)

            _begin(backend, f"{seed}:{task.task_id}:{cell.name}:eval")
            eval_verdicts = _judge_single_pair(
                backend, cell.eval_judges(), task, consensus, baseline,
                (seed, task.task_id, cell.name, "eval"), judge_temperature,
                calls, "eval_judge")

            records.append(RunRecord(
                cell=cell.name, task_id=task.task_id, seed=task_seed,
                task=task_info,
                candidates=tuple(_candidate_to_dict(c) for c in pool.candidates),
                selection={
                    "mechanism": outcome.mechanism,
                    "chosen_index": outcome.chosen_index,
                    "flags": list(outcome.flags),
                    "synthetic": (_candidate_to_dict(outcome.synthetic_candidate)
                                  if outcome.synthetic_candidate else None),
                    "votes": ([list(v) for v in outcome.audit]
                              if outcome.mechanism == "majority_vote" else None),
                },
                selection_verdicts=tuple(
                    _verdict_to_dict(v) for v in outcome.audit
                ) if outcome.mechanism == "judge_panel" else (),
                consensus=_candidate_to_dict(consensus),
                baseline=_candidate_to_dict(baseline),
                eval_verdicts=tuple(_verdict_to_dict(v) for v in eval_verdicts),
                calls=tuple(calls),
                created_at=time.strftime("%Y-%m-%dT%H:%M:%S"),
            ))
        except Exception as e:  # noqa: BLE001 - backend faults become failed records
            failures += 1
            records.append(RunRecord(
                cell=cell.name, task_id=task.task_id, seed=task_seed,
                task=task_info,
                calls=tuple(calls), failed=True, error=f"{type(e).__name__}: {e}",
                created_at=time.strftime("%Y-%m-%dT%H:%M:%S"),
            ))
            if failures > budget:
                raise GenselectError(
                    f"cell {cell.name!r} aborted: {failures} failures over "
                    f"{len(records)} tasks exceeds the {max_failure_rate:.0%} "
                    f"budget (last: {e})") from e
    return records


@dataclass(frozen=True)
class ExperimentArtifact:
    manifest: dict
    records: tuple[RunRecord, ...]

    def cells(self) -> tuple[CellSpec, ...]:
        return tuple(CellSpec.from_dict(d) for d in self.manifest["cells"])

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(self.manifest, fh, indent=2, sort_keys=True)
        persist_records(self.records, directory / "records.jsonl")

    @classmethod
    def load(cls, directory) -> "ExperimentArtifact":
        directory = Path(directory)
        manifest_path = directory / "manifest.json"
        records_path = directory / "records.jsonl"
        if not manifest_path.exists() or not records_path.exists():
            raise ArtifactError(f"no records at {directory}")
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
        records = load_records(records_path)
        if not records:
            raise ArtifactError(f"no records at {directory}")
        return cls(manifest=manifest, records=records)


def _config_digest(cells, tasks, seed, baseline_model, temperatures) -> str:
    blob = json.dumps({
        "cells": [c.to_dict() for c in cells],
        "tasks": [t.to_dict() for t in tasks],
        "seed": seed,
        "baseline_model": baseline_model,
        "temperatures": temperatures,
    }, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def run_experiment(cells: Sequence[CellSpec], tasks: Sequence[TaskSpec],
                   backend: BackendInterface, seed: int, *, baseline_model: str,
                   baseline_pool: int = 3, gen_temperature: float = 0.7,
                   judge_temperature: float = 0.1) -> ExperimentArtifact:
    """Run every cell over every task and assemble the artifact."""
    if not cells:
        raise GenselectError("no cells")
    names = [c.name for c in cells]
    if len(set(names)) != len(names):
        raise GenselectError("duplicate cell names")
    ids = [t.task_id for t in tasks]
    if len(set(ids)) != len(ids):
        raise GenselectError("duplicate task ids")
    for cell in cells:
        report = validate_separation(cell)
        if not report.ok:
            raise SeparationError(
                f"cell {cell.name!r} fails separation: {'; '.join(report.violations)}")

    records: list[RunRecord] = []
    for cell in cells:
        records.extend(run_cell(
            cell, tasks, backend, seed, baseline_model=baseline_model,
            baseline_pool=baseline_pool, gen_temperature=gen_temperature,
            judge_temperature=judge_temperature))

    temperatures = {"generation": gen_temperature, "judging": judge_temperature}
    manifest = {
        "schema": SCHEMA_VERSION,
        "config_digest": _config_digest(cells, tasks, seed, baseline_model,
                                        temperatures),
        "seed": seed,
        "baseline_model": baseline_model,
        "baseline_pool": baseline_pool,
        "temperatures": temperatures,
        "backend": type(backend).__name__,
        "cells": [c.to_dict() for c in cells],
        "counts": {
            "cells": len(cells),
            "tasks": len(tasks),
            "records": len(records),
            "failed": sum(r.failed for r in records),
        },
    }
    return ExperimentArtifact(manifest=manifest,
                              records=tuple(sorted(records,
                                                   key=lambda r: (r.cell, r.task_id))))


def _eval_verdicts_as_cell_vs_baseline(record: RunRecord) -> list[PairwiseVerdict]:
    """Relabel a record's eval verdicts onto shared (cell, baseline) items."""
    out = []
    consensus_id = record.consensus["candidate_id"]
    for d in record.eval_verdicts:
        v = _verdict_from_dict(d)
        first = record.cell if v.presented_first == consensus_id else "baseline"
        out.append(PairwiseVerdict(judge_id=v.judge_id, item_a=record.cell,
                                   item_b="baseline", outcome=v.outcome,
                                   presented_first=first, task_id=v.task_id))
    return out


def bt_win_rate_table(records: Sequence[RunRecord],
                      config: Optional[BTConfig] = None) -> dict[str, float]:
    """Per-cell BT win rate of consensus vs baseline over pooled eval verdicts."""
    by_cell: dict[str, list[PairwiseVerdict]] = {}
    for r in records:
        if r.failed:
            continue
        by_cell.setdefault(r.cell, []).extend(_eval_verdicts_as_cell_vs_baseline(r))
    table = {}
    for cell, verdicts in sorted(by_cell.items()):
        fit = fit_bt(verdicts, config or BTConfig())
        table[cell] = bt_win_rate(fit, cell, "baseline")
    return table


def task_win_rates(records: Sequence[RunRecord]) -> dict[tuple[str, str], float]:
    """Mean judge score (win 1, tie 0.5, loss 0) per (cell, task)."""
    out = {}
    for r in records:
        if r.failed or not r.eval_verdicts:
            continue
        scores = []
        for d in r.eval_verdicts:
            if d["outcome"] == "tie":
                scores.append(0.5)
            else:
                consensus_won = (d["outcome"] == "a_wins") == (
                    d["item_a"] == r.consensus["candidate_id"])
                scores.append(1.0 if consensus_won else 0.0)
        out[(r.cell, r.task_id)] = float(np.mean(scores))
    return out


def check_zero_overlap(artifact: ExperimentArtifact) -> list[str]:
    """Post-hoc audit: no verdict judged by one of its own cell's agents."""
    agents_by_cell = {c.name: set(c.agent_models) for c in artifact.cells()}
    problems = []
    for r in artifact.records:
        agents = agents_by_cell.get(r.cell, set())
        for d in itertools.chain(r.selection_verdicts, r.eval_verdicts):
            if d["judge_id"] in agents:
                problems.append(f"{r.cell}/{r.task_id}: judge {d['judge_id']!r} "
                                "is an agent of the same cell")
    return problems


@dataclass(frozen=True)
class DecoupledReport:
    full_panel: dict[str, float]
    sub_panel: dict[str, float]
    excluded: tuple[str, ...]
    diagnostics: dict[str, JudgeDiagnostics]
    verdicts: tuple[dict, ...]


def decoupled_evaluation(artifact: ExperimentArtifact,
                         independent_judges: Sequence[str],
                         backend: BackendInterface, seed: int,
                         *, judge_temperature: float = 0.1) -> DecoupledReport:
    """Re-judge every stored consensus-vs-baseline pair with a fresh panel.

    Degenerate judges (tie rate >= 0.95 over >= 100 verdicts) are excluded
    and a sub-panel table is reported next to the full-panel one.
    """
    if not independent_judges:
        raise GenselectError("no independent judges")
    for cell in artifact.cells():
        used = set(cell.agent_models) | set(cell.judge_models)
        if cell.synthesizer_model:
            used.add(cell.synthesizer_model)
        overlap = sorted(set(independent_judges) & used)
        if overlap:
            raise SeparationError(
                f"independent judges {overlap} already appear in cell {cell.name!r}")

    all_verdicts: list[PairwiseVerdict] = []
    for r in artifact.records:
        if r.failed:
            continue
        task = TaskSpec(task_id=r.task_id,
                        category=r.task.get("category", CATEGORIES[0]),
                        prompt=r.task.get("prompt", ""),
                        rubric=r.task.get("rubric", ""))
        consensus = Candidate(candidate_id=r.cell, agent_id="consensus",
                              payload=r.consensus["text"])
        baseline = Candidate(candidate_id="baseline", agent_id="baseline",
                             payload=r.baseline["text"])
        _begin(backend, f"{seed}:{r.task_id}:{r.cell}:decoupled")
        calls: list[dict] = []
        all_verdicts.extend(_judge_single_pair(
            backend, independent_judges, task, consensus, baseline,
            (seed, r.task_id, r.cell, "decoupled"), judge_temperature,
            calls, "decoupled_judge"))

    diagnostics = {}
    excluded = []
    for judge in sorted(independent_judges):
        outcomes = [v.outcome for v in all_verdicts if v.judge_id == judge]
        diag = judge_diagnostics(outcomes)
        diagnostics[judge] = diag
        if diag.degenerate:
            excluded.append(judge)
    usable = [j for j in independent_judges if j not in excluded]
    if not usable:
        raise GenselectError("no usable panel: every independent judge is degenerate")

    def wr_table(judges):
        keep = set(judges)
        by_cell: dict[str, list[PairwiseVerdict]] = {}
        for v in all_verdicts:
            if v.judge_id in keep:
                by_cell.setdefault(v.item_a, []).append(v)
        return {cell: bt_win_rate(fit_bt(vs), cell, "baseline")
                for cell, vs in sorted(by_cell.items())}

    return DecoupledReport(
        full_panel=wr_table(independent_judges),
        sub_panel=wr_table(usable),
        excluded=tuple(excluded),
        diagnostics=diagnostics,
        verdicts=tuple(_verdict_to_dict(v) for v in all_verdicts),
    )


def cost_summary(artifact: ExperimentArtifact,
                 cost_table: Mapping[str, float]) -> dict[str, dict]:
    """Per-cell pipeline cost, cheapest cell normalized to 1.0x.

    Only generation and selection calls count (generate, select_judge, vote,
    synthesize); baseline construction and evaluation judging are shared
    measurement overhead, identical in expectation across cells.
    """
    totals: dict[str, float] = {}
    counts: dict[str, int] = {}
    for r in artifact.records:
        spent = 0.0
        n = 0
        for call in r.calls:
            if call["purpose"] not in COSTED_PURPOSES:
                continue
            model = call["model_id"]
            if model not in cost_table:
                raise GenselectError(f"unpriced model {model!r} in cost table")
            spent += float(cost_table[model])
            n += 1
        totals[r.cell] = totals.get(r.cell, 0.0) + spent
        counts[r.cell] = counts.get(r.cell, 0) + n
    if not totals:
        raise ArtifactError("no records")
    cheapest = min(v for v in totals.values())
    if cheapest <= 0:
        raise GenselectError("cheapest cell has zero cost; check the cost table")
    wr = bt_win_rate_table(artifact.records)
    return {
        cell: {
            "relative_cost": totals[cell] / cheapest,
            "total_cost": totals[cell],
            "calls": counts[cell],
            "bt_win_rate": wr.get(cell),
        }
        for cell in sorted(totals)
    }
