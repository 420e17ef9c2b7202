"""Crossover-threshold calibration from pilot data and regime classification.

The crossover s* of a team is where selection quality makes a diverse team
break even with its best homogeneous member.  Calibration estimates it two
ways at once: a point estimate from Monte Carlo team statistics, and a
percentile-bootstrap interval over pilot records, where the pilot's "random"
rows anchor the team mean and its "oracle" rows anchor the team ceiling.
Selectors are then classified into below / near / above regimes, with "near"
defined as falling inside the bootstrap interval.
"""

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import GenselectError
from .quality import MonteCarloConfig, Team, TeamStats, crossover_threshold, team_stats

ANCHOR_RANDOM = "random"
ANCHOR_ORACLE = "oracle"

REGIMES = ("below", "near", "above")


@dataclass(frozen=True)
class CalibrationInput:
    """Team model plus pilot observations of selected latent qualities.

    pilot_records rows are (selector label, selected quality).  The two
    anchor labels "random" and "oracle" estimate the team mean and ceiling;
    any other labels ride along for regime classification.
    """

    team: Team
    mu_best: float
    pilot_records: tuple[tuple[str, float], ...] = ()
    b_bootstrap: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "pilot_records",
                           tuple((str(lab), float(q)) for lab, q in self.pilot_records))
        if self.b_bootstrap < 100:
            raise GenselectError(
                f"b_bootstrap must be >= 100, got {self.b_bootstrap}")
        if not math.isfinite(self.mu_best):
            raise GenselectError("mu_best must be finite")
        for lab, q in self.pilot_records:
            if not lab:
                raise GenselectError("pilot labels must be nonempty")
            if not math.isfinite(q):
                raise GenselectError(f"pilot quality for {lab!r} is not finite")

    def anchor(self, label: str) -> np.ndarray:
        vals = np.array([q for lab, q in self.pilot_records if lab == label])
        if vals.size == 0:
            raise GenselectError(f"pilot has no {label!r} records")
        return vals


@dataclass(frozen=True)
class RegimeReport:
    s_star: float
    ci: tuple[float, float]
    per_selector: Mapping[str, tuple[float, str]]


def calibrate_s_star(inp: CalibrationInput, seed: int, *,
                     mc_trials: int = 100_000) -> tuple[float, tuple[float, float]]:
    """Point estimate of s* plus a seeded percentile-bootstrap 95% CI.

    The point estimate applies the crossover formula to Monte Carlo team
    statistics, which also enforces the M < mu_best < O preconditions.  The
    interval resamples the pilot's anchor rows b_bootstrap times; each
    resample is independently seeded so any execution schedule gives the
    same interval.  All-point-mass teams are exact: the pilot is ignored and
    the interval has zero width.
    """
    stats = team_stats(inp.team, MonteCarloConfig(trials=mc_trials, seed=seed))
    point = crossover_threshold(inp.mu_best, stats)
    if inp.team.all_point():
        return point, (point, point)

    randoms = inp.anchor(ANCHOR_RANDOM)
    oracles = inp.anchor(ANCHOR_ORACLE)
    draws = np.empty(inp.b_bootstrap)
    for b in range(inp.b_bootstrap):
        rng = np.random.default_rng([seed, 0xB007, b])
        m_b = randoms[rng.integers(randoms.size, size=randoms.size)].mean()
        o_b = oracles[rng.integers(oracles.size, size=oracles.size)].mean()
        gap = o_b - m_b
        draws[b] = (inp.mu_best - m_b) / gap if gap != 0.0 else np.nan
    valid = draws[np.isfinite(draws)]
    if valid.size < 0.9 * inp.b_bootstrap:
        raise GenselectError(
            "bootstrap unstable: over 10% of resamples had no mean-oracle gap")
    lo, hi = np.percentile(valid, [2.5, 97.5])
    return point, (float(lo), float(hi))


def pilot_selector_s_hats(inp: CalibrationInput) -> dict[str, float]:
    """Plug-in s for each non-anchor label, scaled by the pilot's own anchors."""
    m_hat = float(inp.anchor(ANCHOR_RANDOM).mean())
    o_hat = float(inp.anchor(ANCHOR_ORACLE).mean())
    gap = o_hat - m_hat
    if gap <= 0:
        raise GenselectError(
            f"pilot anchors give no gap: oracle {o_hat:.4f} <= mean {m_hat:.4f}")
    labels = {lab for lab, _ in inp.pilot_records} - {ANCHOR_RANDOM, ANCHOR_ORACLE}
    return {lab: (float(inp.anchor(lab).mean()) - m_hat) / gap
            for lab in sorted(labels)}


def classify_regimes(s_star: float, ci: tuple[float, float],
                     selector_s_hats: Mapping[str, float]) -> RegimeReport:
    """Below / near / above classification against the bootstrap interval."""
    lo, hi = float(ci[0]), float(ci[1])
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise GenselectError(f"malformed interval ({lo}, {hi})")
    per = {}
    for label, s_hat in selector_s_hats.items():
        s_hat = float(s_hat)
        if not math.isfinite(s_hat):
            raise GenselectError(f"s_hat for {label!r} is not finite")
        if s_hat < lo:
            regime = "below"
        elif s_hat > hi:
            regime = "above"
        else:
            regime = "near"
        per[label] = (s_hat, regime)
    return RegimeReport(s_star=float(s_star), ci=(lo, hi), per_selector=per)


def make_synthetic_pilot(team: Team, n_pools: int, seed: int,
                         selectors: Mapping[str, float] | None = None,
                         ) -> tuple[tuple[str, float], ...]:
    """Generate pilot records from a known team: anchors plus noisy selectors.

    Produces n_pools rows per label from disjoint candidate pools, so every
    record is an independent (pool, selection) observation: "random" rows
    pick uniformly, "oracle" rows take the true max, and each selectors
    entry ({label: noise_sigma}) selects by noisy argmax.  Independence
    across rows is what licenses the independent anchor resampling inside
    calibrate_s_star.
    """
    if n_pools < 1:
        raise GenselectError("n_pools must be >= 1")
    labels = [ANCHOR_RANDOM, ANCHOR_ORACLE, *(selectors or {})]
    rng = np.random.default_rng([seed, 0x9107])
    pools = team.draw_pools(rng, n_pools * len(labels))
    n = team.n
    records: list[tuple[str, float]] = []
    for k, label in enumerate(labels):
        block = pools[k * n_pools:(k + 1) * n_pools]
        if label == ANCHOR_RANDOM:
            picks = rng.integers(n, size=n_pools)
            chosen = block[np.arange(n_pools), picks]
        elif label == ANCHOR_ORACLE:
            chosen = block.max(axis=1)
        else:
            noisy = block + rng.normal(0.0, float(selectors[label]),
                                       size=block.shape)
            chosen = block[np.arange(n_pools), np.argmax(noisy, axis=1)]
        records.extend((label, float(q)) for q in chosen)
    return tuple(records)
