"""Team quality statistics and the linear selection model.

A team of agents produces one candidate each; each candidate carries a
latent quality drawn from the agent's distribution. Two pool statistics
drive everything downstream: the team mean M (expected quality of a
random pick) and the team oracle O (expected quality of the best
candidate). A selector's quality s places its expected pick on the
segment between them, and a diverse team beats the best homogeneous
team exactly when s exceeds the crossover threshold

    s* = (mu_best - M) / (O - M).

This module also houses the correlated-jury majority-vote simulation
used to study why voting underperforms on open-ended pools.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    DiversityDominatedError,
    NoExploitableDiversityError,
    NoOracleAdvantageError,
)

DISTRIBUTION_KINDS = ("point", "gaussian", "empirical")


@dataclass(frozen=True)
class QualityDistribution:
    """Latent quality law of one agent: point mass, Gaussian, or empirical."""

    kind: str
    location: float = 0.0
    scale: float = 0.0
    samples: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in DISTRIBUTION_KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.scale < 0:
            raise ValueError("scale must be >= 0")
        if self.kind == "point" and self.scale != 0:
            raise ValueError("point distribution must have scale 0")
        if self.kind == "empirical":
            if not self.samples:
                raise ValueError("empirical distribution needs at least one sample")
            object.__setattr__(self, "samples", tuple(float(x) for x in self.samples))
        elif self.samples is not None:
            raise ValueError("samples are only valid for the empirical kind")

    @classmethod
    def point(cls, value: float) -> "QualityDistribution":
        return cls("point", location=float(value))

    @classmethod
    def gaussian(cls, mean: float, sd: float) -> "QualityDistribution":
        return cls("gaussian", location=float(mean), scale=float(sd))

    @classmethod
    def empirical(cls, samples) -> "QualityDistribution":
        return cls("empirical", samples=tuple(samples))

    @property
    def mean(self) -> float:
        if self.kind == "empirical":
            return float(np.mean(self.samples))
        return self.location

    @property
    def is_point(self) -> bool:
        return self.kind == "point" or (self.kind == "gaussian" and self.scale == 0.0)

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "point":
            return np.full(size, self.location)
        if self.kind == "gaussian":
            if self.scale == 0.0:
                return np.full(size, self.location)
            return rng.normal(self.location, self.scale, size)
        return rng.choice(np.asarray(self.samples), size=size, replace=True)


@dataclass(frozen=True)
class Team:
    """Ordered collection of (agent_id, quality distribution) pairs."""

    agents: tuple[tuple[str, QualityDistribution], ...]

    def __post_init__(self):
        if not self.agents:
            raise ValueError("team needs at least one agent")
        object.__setattr__(self, "agents", tuple(self.agents))
        ids = [a for a, _ in self.agents]
        if len(set(ids)) != len(ids):
            raise ValueError("agent ids must be unique")

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def distributions(self) -> tuple[QualityDistribution, ...]:
        return tuple(d for _, d in self.agents)

    def all_point(self) -> bool:
        return all(d.is_point for d in self.distributions)

    def draw_pools(self, rng: np.random.Generator, trials: int) -> np.ndarray:
        """(trials, n) array of joint independent candidate qualities."""
        return np.column_stack([d.draw(rng, trials) for d in self.distributions])


@dataclass(frozen=True)
class MonteCarloConfig:
    trials: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


@dataclass(frozen=True)
class TeamStats:
    """Summary (M, O, gap) of a team's candidate pool."""

    mean: float
    oracle: float
    gap: float = field(default=None)  # type: ignore[assignment]
    oracle_se: float = 0.0

    def __post_init__(self):
        if self.gap is None:
            object.__setattr__(self, "gap", self.oracle - self.mean)
        elif abs(self.gap - (self.oracle - self.mean)) > 1e-12:
            raise ValueError("gap must equal oracle - mean")
        if self.oracle_se < 0:
            raise ValueError("oracle_se must be >= 0")
        if self.gap < -3.0 * self.oracle_se:
            raise ValueError("oracle below mean beyond Monte Carlo tolerance")


def team_mean(team: Team) -> float:
    """M(T): expected quality of a uniformly random candidate."""
    return float(np.mean([d.mean for d in team.distributions]))


def team_oracle(team: Team, mc: MonteCarloConfig = MonteCarloConfig()) -> tuple[float, float]:
    """O(T): expected quality of the best candidate, with its MC standard error.

    All-point-mass teams are handled analytically (se = 0); otherwise a
    seeded Monte Carlo over joint independent draws.
    """
    if team.all_point():
        return max(d.mean for d in team.distributions), 0.0
    rng = np.random.default_rng(mc.seed)
    pools = team.draw_pools(rng, mc.trials)
    est, sd = _kernels.rowmax_mean_std(pools)
    return est, sd / np.sqrt(mc.trials)


def team_stats(team: Team, mc: MonteCarloConfig = MonteCarloConfig()) -> TeamStats:
    """Convenience bundle of team_mean and team_oracle."""
    mean = team_mean(team)
    oracle, se = team_oracle(team, mc)
    return TeamStats(mean=mean, oracle=oracle, gap=oracle - mean, oracle_se=se)


def _check_s(s: float) -> float:
    s = float(s)
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"selector quality s must be in [0, 1], got {s}")
    return s


def expected_quality(stats: TeamStats, s: float) -> float:
    """Q(T, s) = s*O + (1-s)*M, the linear selection model."""
    s = _check_s(s)
    return s * stats.oracle + (1.0 - s) * stats.mean


def selector_quality_hat(selected_mean: float, stats: TeamStats) -> float:
    """Empirical selector quality (selected_mean - M) / (O - M).

    Unclamped: anti-selectors legitimately land below 0 and lucky noise
    above 1. Values outside [-0.25, 1.25] trigger a SelectorQualityWarning.
    """
    import warnings

    from .errors import SelectorQualityWarning

    if stats.gap <= 0:
        raise NoExploitableDiversityError(
            "no exploitable diversity: team oracle does not exceed team mean"
        )
    s_hat = (selected_mean - stats.mean) / stats.gap
    if not -0.25 <= s_hat <= 1.25:
        warnings.warn(
            f"selector quality estimate {s_hat:.3f} outside [-0.25, 1.25]",
            SelectorQualityWarning,
            stacklevel=2,
        )
    return s_hat


def crossover_threshold(mu_best: float, stats_diverse: TeamStats) -> float:
    """s* = (mu_best - M) / (O - M), the diversity crossover threshold.

    Requires M < mu_best < O; the two violations are reported distinctly
    because they mean different things (diversity already dominates vs.
    no oracle headroom to exploit).
    """
    if mu_best <= stats_diverse.mean:
        raise DiversityDominatedError(
            f"diversity dominated: mu_best {mu_best} <= team mean {stats_diverse.mean}"
        )
    if mu_best >= stats_diverse.oracle:
        raise NoOracleAdvantageError(
            f"no oracle advantage: mu_best {mu_best} >= team oracle {stats_diverse.oracle}"
        )
    return (mu_best - stats_diverse.mean) / stats_diverse.gap


class SelectorCurve:
    """Strictly increasing response curve g on [0, 1] with g(0)=0, g(1)=1.

    Generalizes the linear model to Q = g(s)*O + (1-g(s))*M; stored as a
    piecewise-linear grid so the inverse is a monotone interpolation.
    """

    def __init__(self, grid):
        pts = [(float(s), float(g)) for s, g in grid]
        if len(pts) < 2:
            raise ValueError("curve needs at least 2 grid points")
        s_vals = np.array([p[0] for p in pts])
        g_vals = np.array([p[1] for p in pts])
        if np.any(np.diff(s_vals) <= 0):
            raise ValueError("s grid must be strictly increasing")
        if np.any(np.diff(g_vals) <= 0):
            raise ValueError("g must be strictly increasing in s")
        if s_vals[0] != 0.0 or s_vals[-1] != 1.0:
            raise ValueError("s grid must span [0, 1]")
        if abs(g_vals[0]) > 1e-12 or abs(g_vals[-1] - 1.0) > 1e-12:
            raise ValueError("curve must satisfy g(0)=0 and g(1)=1")
        self.s_grid = s_vals
        self.g_grid = g_vals

    @classmethod
    def identity(cls) -> "SelectorCurve":
        return cls([(0.0, 0.0), (1.0, 1.0)])

    @classmethod
    def from_function(cls, fn, points: int = 1001) -> "SelectorCurve":
        s = np.linspace(0.0, 1.0, points)
        return cls(list(zip(s, [fn(x) for x in s])))

    def __call__(self, s: float) -> float:
        return float(np.interp(s, self.s_grid, self.g_grid))

    def inverse(self, g: float) -> float:
        return float(np.interp(g, self.g_grid, self.s_grid))


def nonlinear_crossover(
    mu_best: float, stats_diverse: TeamStats, curve: SelectorCurve
) -> float:
    """Crossover threshold g^{-1}((mu_best - M)/(O - M)) for a nonlinear curve."""
    ratio = crossover_threshold(mu_best, stats_diverse)
    return curve.inverse(ratio)


def marginal_gain(stats_n: TeamStats, stats_n_plus_1: TeamStats, s: float) -> float:
    """Expected quality change from expanding the team by one agent at fixed s."""
    s = _check_s(s)
    return s * (stats_n_plus_1.oracle - stats_n.oracle) + (1.0 - s) * (
        stats_n_plus_1.mean - stats_n.mean
    )


def homogeneous_quality(mu: float, s: float) -> float:
    """Expected output of a homogeneous team: mu for every s.

    Within-model sampling variation is negligible material for selection,
    so the selector has nothing to exploit.
    """
    _check_s(s)
    return float(mu)


def cjt_vote_accuracy(
    n: int, p: float, rho: float, trials: int = 100_000, seed: int = 0
) -> float:
    """Majority-vote accuracy of n correlated jurors, by Monte Carlo.

    Each juror is correct with marginal probability p. Pairwise
    correlation rho comes from a single-common-shock mixture: with
    probability rho the whole panel copies one shared draw, otherwise
    jurors vote independently. n must be odd so no vote ties arise.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must be in [0, 1]")
    if n < 1 or n % 2 == 0:
        raise ValueError("n must be a positive odd count (ties are ambiguous)")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    mix_u = rng.random(trials)
    shared_u = rng.random(trials)
    vote_u = rng.random((trials, n))
    correct = _kernels.cjt_correct_count(mix_u, shared_u, vote_u, p, rho)
    return correct / trials
