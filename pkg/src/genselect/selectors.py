"""Selector and aggregator mechanisms over candidate pools.

Six mechanisms: random, oracle, noisy argmax, majority vote, judge-panel
selection (round-robin pairwise comparisons scored by Bradley-Terry), and
synthesis (weighted blend with an incoherence penalty).  All are pure given
(pool, seed); judge-panel audits are canonicalized (sorted by pair, then
judge) so results do not depend on call scheduling.
"""

import hashlib
import itertools
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from . import _kernels
from .backends import BackendInterface, encode_quality_text, parse_quality_text
from .btscore import BTConfig, PairwiseVerdict, fit_bt
from .errors import (
    GenselectError,
    NoExploitableDiversityError,
    SeparationError,
)
from .quality import Team

MECHANISMS = ("random", "oracle", "noisy_argmax", "majority_vote",
              "judge_panel", "synthesis")


@dataclass(frozen=True)
class Candidate:
    """One agent's response: a latent quality in mock mode, text in live mode."""

    candidate_id: str
    agent_id: str
    latent_quality: Optional[float] = None
    payload: Optional[str] = None
    task_id: Optional[str] = None

    def __post_init__(self):
        if not self.candidate_id:
            raise GenselectError("candidate_id must be nonempty")
        if self.latent_quality is None and self.payload is None:
            raise GenselectError(
                f"candidate {self.candidate_id!r} has neither latent_quality nor payload")


@dataclass(frozen=True)
class CandidatePool:
    task_id: str
    candidates: tuple[Candidate, ...]

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if not self.candidates:
            raise GenselectError("pool must contain at least one candidate")
        ids = [c.candidate_id for c in self.candidates]
        if len(set(ids)) != len(ids):
            raise GenselectError(f"duplicate candidate ids in pool {self.task_id!r}")
        for c in self.candidates:
            if c.task_id is not None and c.task_id != self.task_id:
                raise GenselectError(
                    f"candidate {c.candidate_id!r} belongs to task {c.task_id!r}, "
                    f"not {self.task_id!r}")

    @property
    def n(self) -> int:
        return len(self.candidates)

    @property
    def agent_ids(self) -> tuple[str, ...]:
        return tuple(c.agent_id for c in self.candidates)

    def latent_qualities(self) -> np.ndarray:
        qs = [c.latent_quality for c in self.candidates]
        if any(q is None for q in qs):
            missing = [c.candidate_id for c in self.candidates if c.latent_quality is None]
            raise GenselectError(f"candidates missing latent quality: {missing}")
        return np.asarray(qs, dtype=np.float64)


@dataclass(frozen=True)
class SelectionOutcome:
    """Result of applying a mechanism to a pool.

    chosen_index points into the pool for every mechanism except synthesis,
    which produces a synthetic_candidate instead.  audit holds the
    intermediate records (votes or pairwise verdicts).
    """

    chosen_index: Optional[int]
    mechanism: str
    synthetic_candidate: Optional[Candidate] = None
    audit: tuple = ()
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise GenselectError(f"unknown mechanism {self.mechanism!r}")
        if self.mechanism == "synthesis":
            if self.synthetic_candidate is None or self.chosen_index is not None:
                raise GenselectError("synthesis outcome carries a synthetic candidate only")
        else:
            if self.chosen_index is None or self.synthetic_candidate is not None:
                raise GenselectError(
                    f"{self.mechanism} outcome needs chosen_index and no synthetic candidate")
            if self.chosen_index < 0:
                raise GenselectError("chosen_index must be nonnegative")

    def selected(self, pool: CandidatePool) -> Candidate:
        if self.mechanism == "synthesis":
            return self.synthetic_candidate
        return pool.candidates[self.chosen_index]


@dataclass(frozen=True)
class BlendParams:
    """Synthesis parameters: blend weights and the incoherence penalty."""

    weights: Optional[tuple[float, ...]] = None
    incoherence_lambda: float = 0.0

    def __post_init__(self):
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.incoherence_lambda < 0:
            raise GenselectError("incoherence_lambda must be >= 0")

    def resolve(self, n: int) -> np.ndarray:
        if self.weights is None:
            return np.full(n, 1.0 / n)
        w = np.asarray(self.weights, dtype=np.float64)
        if len(w) != n:
            raise GenselectError(f"{len(w)} weights for {n} candidates")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise GenselectError("weights must be nonnegative and sum to 1")
        return w


@dataclass(frozen=True)
class SelectorSpec:
    """Mechanism name plus its parameters, as configured for a cell."""

    mechanism: str
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise GenselectError(
                f"unknown mechanism {self.mechanism!r}; expected one of {MECHANISMS}")
        object.__setattr__(self, "params", dict(self.params))


def candidate_text(candidate: Candidate) -> str:
    """Text handed to backends: the payload, or the encoded latent quality."""
    if candidate.payload is not None:
        return candidate.payload
    return encode_quality_text(candidate.latent_quality)


def select_random(pool: CandidatePool, seed: int) -> SelectionOutcome:
    rng = np.random.default_rng(seed)
    idx = int(rng.integers(pool.n))
    return SelectionOutcome(chosen_index=idx, mechanism="random")


def select_oracle(pool: CandidatePool) -> SelectionOutcome:
    qs = pool.latent_qualities()
    return SelectionOutcome(chosen_index=int(np.argmax(qs)), mechanism="oracle")


def select_noisy_argmax(pool: CandidatePool, noise_sigma: float,
                        seed: int) -> SelectionOutcome:
    if noise_sigma < 0:
        raise GenselectError("noise_sigma must be >= 0")
    qs = pool.latent_qualities()
    if noise_sigma > 0:
        qs = qs + np.random.default_rng(seed).normal(0.0, noise_sigma, pool.n)
    return SelectionOutcome(chosen_index=int(np.argmax(qs)), mechanism="noisy_argmax")


def majority_vote(pool: CandidatePool, votes: Sequence[tuple[str, int]],
                  seed: int) -> SelectionOutcome:
    if not votes:
        raise GenselectError("majority_vote needs at least one vote")
    idxs = np.array([v[1] for v in votes], dtype=np.int64)
    if np.any(idxs < 0) or np.any(idxs >= pool.n):
        raise GenselectError(f"vote index out of range for pool of {pool.n}")
    tie_u = np.random.default_rng(seed).random(1)
    winner = _kernels.plurality_winners(idxs[None, :], pool.n, tie_u)
    return SelectionOutcome(chosen_index=int(winner[0]), mechanism="majority_vote",
                            audit=tuple(votes))


def synthesize(pool: CandidatePool, blend: BlendParams = BlendParams(), *,
               backend: Optional[BackendInterface] = None,
               synthesizer_model: Optional[str] = None,
               prompt: str = "") -> SelectionOutcome:
    """Blend the pool into one synthetic candidate.

    Without a backend the blend law is applied to latent qualities directly;
    with one, the call is delegated to the backend's synthesizer model and
    the blend law lives in that model's behavior.
    """
    synth_id = f"synth:{pool.task_id}"
    if backend is not None:
        if not synthesizer_model:
            raise GenselectError("backend synthesis requires a synthesizer_model")
        text = backend.synthesize(synthesizer_model, prompt,
                                  [candidate_text(c) for c in pool.candidates])
        try:
            quality = parse_quality_text(text)
        except GenselectError:
            quality = None
        synthetic = Candidate(synth_id, synthesizer_model, latent_quality=quality,
                              payload=text, task_id=pool.task_id)
    else:
        qs = pool.latent_qualities()
        w = blend.resolve(pool.n)
        quality = float(np.dot(w, qs) - blend.incoherence_lambda)
        synthetic = Candidate(synth_id, synthesizer_model or "synthesizer",
                              latent_quality=quality, task_id=pool.task_id)
    return SelectionOutcome(chosen_index=None, mechanism="synthesis",
                            synthetic_candidate=synthetic)


def _judge_seed_word(judge_id: str) -> int:
    return int.from_bytes(hashlib.sha256(judge_id.encode()).digest()[:4], "big")


def judge_panel_select(pool: CandidatePool, judges: Sequence[str],
                       backend: BackendInterface, seed: int, *,
                       prompt: str = "", rubric: str = "",
                       temperature: float = 0.1,
                       bt_config: Optional[BTConfig] = None) -> SelectionOutcome:
    """Round-robin pairwise judging, Bradley-Terry scored.

    Every judge compares every unordered candidate pair once, with the
    presentation order randomized per (seed, pair, judge) so the schedule
    never matters.  Winner is the highest-ability candidate, ties broken by
    lowest pool index.
    """
    if pool.n < 2:
        raise GenselectError("judge_panel_select needs at least 2 candidates")
    if not judges:
        raise GenselectError("judge_panel_select needs at least 1 judge")
    overlap = set(judges) & set(pool.agent_ids)
    if overlap:
        raise SeparationError(f"separation violated: {sorted(overlap)} appear as "
                              "both judge and agent")

    verdicts = []
    for i, j in itertools.combinations(range(pool.n), 2):
        ci, cj = pool.candidates[i], pool.candidates[j]
        for judge in sorted(judges):
            order_rng = np.random.default_rng([seed, i, j, _judge_seed_word(judge)])
            i_first = bool(order_rng.random() < 0.5)
            first, second = (ci, cj) if i_first else (cj, ci)
            raw = backend.judge_pair(judge, prompt, rubric, candidate_text(first),
                                     candidate_text(second), temperature)
            if raw == "tie":
                outcome = "tie"
            elif raw == "first":
                outcome = "a_wins" if i_first else "b_wins"
            elif raw == "second":
                outcome = "b_wins" if i_first else "a_wins"
            else:
                raise GenselectError(f"backend returned unknown verdict {raw!r}")
            verdicts.append(PairwiseVerdict(
                judge_id=judge, item_a=ci.candidate_id, item_b=cj.candidate_id,
                outcome=outcome, presented_first=first.candidate_id,
                task_id=pool.task_id))

    fit = fit_bt(verdicts, bt_config or BTConfig())
    abilities = np.array([fit.abilities[c.candidate_id] for c in pool.candidates])
    flags = ("indistinguishable",) if "no_signal" in fit.flags else ()
    return SelectionOutcome(chosen_index=int(np.argmax(abilities)),
                            mechanism="judge_panel", audit=tuple(verdicts),
                            flags=flags)


def _selected_values(spec: SelectorSpec, pools: np.ndarray,
                     rng: np.random.Generator) -> np.ndarray:
    """Vectorized per-trial selected quality for the simulable mechanisms."""
    trials, n = pools.shape
    rows = np.arange(trials)
    mech, params = spec.mechanism, spec.params
    if mech == "random":
        return pools[rows, rng.integers(n, size=trials)]
    if mech == "oracle":
        return pools.max(axis=1)
    if mech == "noisy_argmax":
        sigma = float(params.get("noise_sigma", 0.0))
        if sigma < 0:
            raise GenselectError("noise_sigma must be >= 0")
        perturbed = pools + rng.normal(0.0, sigma, pools.shape) if sigma > 0 else pools
        return pools[rows, _kernels.rowargmax(perturbed)]
    if mech == "majority_vote":
        sigma = float(params.get("voter_sigma", 0.0))
        perceived = pools[:, None, :] + rng.normal(0.0, sigma, (trials, n, n))
        votes = perceived.argmax(axis=2)
        winners = _kernels.plurality_winners(votes, n, rng.random(trials))
        return pools[rows, winners]
    if mech == "synthesis":
        blend = BlendParams(weights=params.get("weights"),
                            incoherence_lambda=float(params.get("incoherence_lambda", 0.0)))
        return pools @ blend.resolve(n) - blend.incoherence_lambda
    raise GenselectError(
        "judge_panel selector quality is estimated from run artifacts, not "
        "simulated pools; use the harness")


def estimate_selector_quality(spec: SelectorSpec, team: Team, trials: int = 10_000,
                              seed: int = 0, b_bootstrap: int = 1000
                              ) -> tuple[float, tuple[float, float]]:
    """Empirical selector quality on simulated pools, with a bootstrap CI.

    The mean and oracle anchors are computed on the same simulated pools as
    the selector, so the oracle mechanism scores exactly 1 and random scores
    0 up to sampling noise.  The CI is a paired percentile bootstrap over
    trials (anchors resampled jointly with selections).
    """
    if trials < 2:
        raise GenselectError("trials must be >= 2")
    rng = np.random.default_rng([seed, 0x5E1EC7])
    pools = team.draw_pools(rng, trials)
    means = pools.mean(axis=1)
    maxes = pools.max(axis=1)
    gaps = maxes - means
    gap = float(gaps.mean())
    gap_se = float(gaps.std(ddof=1) / np.sqrt(trials))
    if gap <= 3.0 * gap_se:
        raise NoExploitableDiversityError(
            f"no exploitable diversity: oracle-mean gap {gap:.3g} within "
            f"3 standard errors ({gap_se:.3g}) of zero")

    sel = _selected_values(spec, pools, rng)
    s_hat = float((sel.mean() - means.mean()) / gap)

    boot = np.empty(b_bootstrap)
    chunk = 200
    for start in range(0, b_bootstrap, chunk):
        size = min(chunk, b_bootstrap - start)
        idx = rng.integers(trials, size=(size, trials))
        num = sel[idx].mean(axis=1) - means[idx].mean(axis=1)
        den = maxes[idx].mean(axis=1) - means[idx].mean(axis=1)
        boot[start:start + size] = num / den
    lo, hi = np.percentile(boot, [2.5, 97.5])
    return s_hat, (float(lo), float(hi))
