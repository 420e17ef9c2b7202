"""Confirmatory and exploratory statistics for win-rate experiments.

Covers the analysis toolkit end to end: standardized effect sizes (Hedges' g
with small-sample correction, Glass's delta), Welch's t, OLS on cell dummies
with HC3 sandwich errors and a robust Wald F, a random-intercept model fitted
by profile REML, Holm-Bonferroni adjustment, exact binomial intervals and
tests, percentile bootstrap, Spearman rank correlation, two-proportion
chi-square, power calculations, and a logit-scale sensitivity refit.

Design matrices here are always cell-dummy designs: an intercept for the
reference cell plus one indicator per remaining cell, so coefficients are
interpretable as win-rate differences against the reference.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy.special import betaincinv, chdtrc, fdtrc, ndtr, ndtri, stdtr
from scipy.stats import rankdata

from .errors import (
    DegenerateVarianceError,
    GenselectError,
    RankDeficiencyError,
)

Z975 = float(ndtri(0.975))


@dataclass(frozen=True)
class SampleSummary:
    """Sufficient statistics of one group: size, mean, standard deviation."""

    n: int
    mean: float
    sd: float

    def __post_init__(self):
        if self.n < 1:
            raise GenselectError("n must be >= 1")
        if self.sd < 0:
            raise GenselectError("sd must be >= 0")

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "SampleSummary":
        arr = np.asarray(values, dtype=np.float64)
        sd = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
        return cls(n=len(arr), mean=float(arr.mean()), sd=sd)


@dataclass(frozen=True)
class DesignMatrixSpec:
    """Cell-dummy regression input: observations of a [0,1] response per cell."""

    cells: tuple[str, ...]
    reference: str
    observations: tuple[tuple[str, str, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        object.__setattr__(self, "observations",
                           tuple((c, t, float(v)) for c, t, v in self.observations))
        if len(set(self.cells)) != len(self.cells):
            raise GenselectError("duplicate cell names")
        if self.reference not in self.cells:
            raise GenselectError(f"reference {self.reference!r} not among cells")
        if not self.observations:
            raise GenselectError("no observations")
        for cell, _task, value in self.observations:
            if cell not in self.cells:
                raise GenselectError(f"observation cell {cell!r} not among cells")
            if not 0.0 <= value <= 1.0:
                raise GenselectError(f"response {value} outside [0, 1]")

    @classmethod
    def from_cell_values(cls, values_by_cell: Mapping[str, Sequence[float]],
                         reference: str) -> "DesignMatrixSpec":
        """Build a spec with positional task ids shared across cells."""
        obs = []
        for cell, values in values_by_cell.items():
            obs.extend((cell, f"t{i:03d}", float(v)) for i, v in enumerate(values))
        return cls(cells=tuple(values_by_cell), reference=reference,
                   observations=tuple(obs))

    def response(self) -> np.ndarray:
        return np.array([v for _, _, v in self.observations])

    def dummy_columns(self) -> tuple[str, ...]:
        return tuple(c for c in self.cells if c != self.reference)

    def design(self) -> np.ndarray:
        cols = self.dummy_columns()
        X = np.zeros((len(self.observations), 1 + len(cols)))
        X[:, 0] = 1.0
        index = {c: j + 1 for j, c in enumerate(cols)}
        for i, (cell, _task, _v) in enumerate(self.observations):
            if cell != self.reference:
                X[i, index[cell]] = 1.0
        return X

    def groups(self) -> tuple[str, ...]:
        return tuple(t for _, t, _ in self.observations)


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    ci: Optional[tuple[float, float]] = None
    df: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise GenselectError(f"p_value {self.p_value} outside [0, 1]")
        if self.ci is not None and self.ci[0] > self.ci[1]:
            raise GenselectError(f"interval reversed: {self.ci}")


def _hedges_j(n_total: int) -> float:
    return 1.0 - 3.0 / (4.0 * n_total - 9.0)


def hedges_g(a: SampleSummary, b: SampleSummary) -> tuple[float, tuple[float, float]]:
    """Bias-corrected standardized mean difference with a normal-theory CI."""
    if a.n < 2 or b.n < 2:
        raise GenselectError("hedges_g needs n >= 2 in both groups")
    pooled_var = (((a.n - 1) * a.sd**2 + (b.n - 1) * b.sd**2) / (a.n + b.n - 2))
    if pooled_var <= 0:
        raise DegenerateVarianceError("zero pooled variance")
    g = _hedges_j(a.n + b.n) * (a.mean - b.mean) / math.sqrt(pooled_var)
    var_g = (a.n + b.n) / (a.n * b.n) + g**2 / (2.0 * (a.n + b.n - 2))
    half = Z975 * math.sqrt(var_g)
    return g, (g - half, g + half)


def glass_delta(sd_source: SampleSummary, comparison: SampleSummary) -> float:
    """Mean difference standardized by the first group's SD alone.

    The group whose dispersion defines the scale goes first; the value is
    (sd_source.mean - comparison.mean) / sd_source.sd.
    """
    if sd_source.sd <= 0:
        raise DegenerateVarianceError("sd-source group has zero variance")
    return (sd_source.mean - comparison.mean) / sd_source.sd


def welch_t(a: SampleSummary, b: SampleSummary) -> TestResult:
    """Unequal-variance t test with Satterthwaite degrees of freedom."""
    if a.n < 2 or b.n < 2:
        raise GenselectError("welch_t needs n >= 2 in both groups")
    if a.sd <= 0 or b.sd <= 0:
        raise DegenerateVarianceError("welch_t needs positive variance in both groups")
    va, vb = a.sd**2 / a.n, b.sd**2 / b.n
    t = (a.mean - b.mean) / math.sqrt(va + vb)
    df = (va + vb) ** 2 / (va**2 / (a.n - 1) + vb**2 / (b.n - 1))
    p = 2.0 * float(stdtr(df, -abs(t)))
    return TestResult(statistic=t, p_value=p, df=df)


@dataclass(frozen=True)
class OLSResult:
    coefficients: dict[str, float]
    hc3_se: dict[str, float]
    r_squared: float
    f_stat: float
    f_p_value: float
    p_values: dict[str, float]
    df_resid: int
    flags: tuple[str, ...] = ()


def _name_collinear(X: np.ndarray, names: Sequence[str]) -> list[str]:
    full_rank = np.linalg.matrix_rank(X)
    redundant = []
    for j in range(X.shape[1]):
        reduced = np.delete(X, j, axis=1)
        if np.linalg.matrix_rank(reduced) == full_rank:
            redundant.append(names[j])
    return redundant


def _fit_ols_hc3(X: np.ndarray, y: np.ndarray, names: Sequence[str]) -> OLSResult:
    n, p = X.shape
    if n <= p:
        raise GenselectError(f"need more observations ({n}) than parameters ({p})")
    if np.linalg.matrix_rank(X) < p:
        raise RankDeficiencyError(
            f"design is rank deficient; collinear columns: {_name_collinear(X, names)}")

    xtx_inv = np.linalg.inv(X.T @ X)
    beta = xtx_inv @ X.T @ y
    resid = y - X @ beta
    h = np.einsum("ij,jk,ik->i", X, xtx_inv, X)
    if np.any(h >= 1.0 - 1e-10):
        raise GenselectError("leverage of 1 (a singleton cell?) makes HC3 undefined")

    omega = (resid / (1.0 - h)) ** 2
    cov = xtx_inv @ (X.T * omega) @ X @ xtx_inv
    se = np.sqrt(np.diag(cov))
    df_resid = n - p

    sst = float(np.sum((y - y.mean()) ** 2))
    flags: tuple[str, ...] = ()
    if sst == 0.0:
        r2, f_stat, f_p = float("nan"), 0.0, 1.0
        flags = ("zero_variance",)
        p_values = {name: 1.0 for name in names}
        se = np.zeros(p)
    else:
        r2 = 1.0 - float(np.sum(resid**2)) / sst
        # Robust Wald test that all non-intercept coefficients are zero.
        q = p - 1
        if q > 0:
            b_d = beta[1:]
            v_d = cov[1:, 1:]
            wald = float(b_d @ np.linalg.solve(v_d, b_d))
            f_stat = wald / q
            f_p = float(fdtrc(q, df_resid, f_stat))
        else:
            f_stat, f_p = 0.0, 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            t_vals = np.where(se > 0, beta / np.where(se > 0, se, 1.0), np.inf)
        p_values = {name: 2.0 * float(stdtr(df_resid, -abs(t)))
                    for name, t in zip(names, t_vals)}

    return OLSResult(
        coefficients=dict(zip(names, beta)),
        hc3_se=dict(zip(names, se)),
        r_squared=r2,
        f_stat=f_stat,
        f_p_value=f_p,
        p_values=p_values,
        df_resid=df_resid,
        flags=flags,
    )


def ols_hc3(spec: DesignMatrixSpec) -> OLSResult:
    """OLS on cell dummies with an HC3 sandwich covariance.

    Coefficients on a dummy design are exactly cell mean minus reference
    mean; the overall F is a robust Wald test over the dummy block.
    """
    names = ("intercept",) + spec.dummy_columns()
    return _fit_ols_hc3(spec.design(), spec.response(), names)


@dataclass(frozen=True)
class MixedFitResult:
    coefficients: dict[str, float]
    group_variance: float
    residual_variance: float
    psi: float
    flags: tuple[str, ...] = ()


def _reml_pieces(X, y, group_index, sizes, psi):
    """GLS quantities under V = I + psi * (block J per group), by identity.

    Per group t of size m: V_t^{-1} = I - (psi / (1 + m psi)) J and
    log det V_t = log(1 + m psi), so everything reduces to per-group sums.
    """
    p = X.shape[1]
    A = X.T @ X
    xty = X.T @ y
    yty = float(y @ y)
    logdet_v = 0.0
    for t, m in enumerate(sizes):
        rows = group_index[t]
        c = psi / (1.0 + m * psi)
        sx = X[rows].sum(axis=0)
        sy = float(y[rows].sum())
        A = A - c * np.outer(sx, sx)
        xty = xty - c * sx * sy
        yty = yty - c * sy * sy
        logdet_v += math.log1p(m * psi)
    try:
        beta = np.linalg.solve(A, xty)
    except np.linalg.LinAlgError:
        raise RankDeficiencyError("singular GLS system in random-intercept fit") from None
    rss = yty - 2.0 * float(beta @ xty) + float(beta @ A @ beta)
    rss = max(rss, 1e-300)
    sign, logdet_a = np.linalg.slogdet(A)
    if sign <= 0:
        raise RankDeficiencyError("singular GLS system in random-intercept fit")
    return beta, rss, logdet_v, logdet_a


def _reml_criterion(X, y, group_index, sizes, psi):
    n, p = X.shape
    _, rss, logdet_v, logdet_a = _reml_pieces(X, y, group_index, sizes, psi)
    return logdet_v + (n - p) * math.log(rss) + logdet_a


def random_intercept_fit(spec: DesignMatrixSpec) -> MixedFitResult:
    """Random-intercept-per-task model via profile REML.

    The variance ratio psi = group/residual is profiled on a log grid with
    golden-section refinement; coefficients are GLS at the optimum.  With no
    between-group variance the fit collapses to OLS.
    """
    X, y = spec.design(), spec.response()
    names = ("intercept",) + spec.dummy_columns()
    tasks = spec.groups()
    labels = sorted(set(tasks))
    if len(labels) < 2:
        raise GenselectError("random_intercept_fit needs >= 2 groups")
    group_index = [np.flatnonzero([t == lab for t in tasks]) for lab in labels]
    sizes = [len(rows) for rows in group_index]
    n, p = X.shape
    if n <= p:
        raise GenselectError(f"need more observations ({n}) than parameters ({p})")
    if np.linalg.matrix_rank(X) < p:
        raise RankDeficiencyError(
            f"design is rank deficient; collinear columns: {_name_collinear(X, names)}")

    flags: tuple[str, ...] = ()
    if max(sizes) == 1:
        # One observation per group: the intercepts are unidentifiable, so
        # pin psi at zero and fall back to OLS.
        flags = ("unidentifiable",)
        psi_hat = 0.0
    else:
        grid = np.concatenate([[0.0], np.logspace(-6, 3, 60)])
        crit = [_reml_criterion(X, y, group_index, sizes, g) for g in grid]
        k = int(np.argmin(crit))
        lo = grid[max(k - 1, 0)]
        hi = grid[min(k + 1, len(grid) - 1)]
        if hi <= lo:
            psi_hat = float(grid[k])
        else:
            invphi = (math.sqrt(5.0) - 1.0) / 2.0
            a, b = lo, hi
            c = b - invphi * (b - a)
            d = a + invphi * (b - a)
            fc = _reml_criterion(X, y, group_index, sizes, c)
            fd = _reml_criterion(X, y, group_index, sizes, d)
            for _ in range(80):
                if fc < fd:
                    b, d, fd = d, c, fc
                    c = b - invphi * (b - a)
                    fc = _reml_criterion(X, y, group_index, sizes, c)
                else:
                    a, c, fc = c, d, fd
                    d = a + invphi * (b - a)
                    fd = _reml_criterion(X, y, group_index, sizes, d)
            psi_hat = (a + b) / 2.0
            if _reml_criterion(X, y, group_index, sizes, 0.0) <= _reml_criterion(
                    X, y, group_index, sizes, psi_hat):
                psi_hat = 0.0

    beta, rss, _, _ = _reml_pieces(X, y, group_index, sizes, psi_hat)
    sigma2 = rss / (n - p)
    return MixedFitResult(
        coefficients=dict(zip(names, beta)),
        group_variance=psi_hat * sigma2,
        residual_variance=sigma2,
        psi=psi_hat,
        flags=flags,
    )


def holm_bonferroni(p_values: Sequence[float]) -> list[float]:
    """Step-down Holm adjustment, returned in the input order."""
    ps = np.asarray(p_values, dtype=np.float64)
    if np.any(ps < 0) or np.any(ps > 1):
        raise GenselectError("p values must lie in [0, 1]")
    k = len(ps)
    order = np.argsort(ps, kind="stable")
    adjusted = np.empty(k)
    running = 0.0
    for rank, idx in enumerate(order):
        running = max(running, (k - rank) * ps[idx])
        adjusted[idx] = min(running, 1.0)
    return adjusted.tolist()


def clopper_pearson(successes: int, n: int, level: float = 0.95
                    ) -> tuple[float, float]:
    """Exact binomial confidence interval from beta quantiles."""
    if not 0 <= successes <= n:
        raise GenselectError(f"successes {successes} outside [0, {n}]")
    if not 0.0 < level < 1.0:
        raise GenselectError("level must be in (0, 1)")
    alpha = 1.0 - level
    lower = 0.0 if successes == 0 else float(
        betaincinv(successes, n - successes + 1, alpha / 2.0))
    upper = 1.0 if successes == n else float(
        betaincinv(successes + 1, n - successes, 1.0 - alpha / 2.0))
    return lower, upper


def sign_test(positives: int, negatives: int) -> TestResult:
    """One-sided exact binomial test of positives against a fair coin."""
    if positives < 0 or negatives < 0 or positives + negatives < 1:
        raise GenselectError("need at least one non-tied observation")
    n = positives + negatives
    tail = sum(math.comb(n, k) for k in range(positives, n + 1))
    p = tail / 2**n
    return TestResult(statistic=float(positives), p_value=float(p))


def bootstrap_ci(samples: Sequence[float], statistic: Callable[[np.ndarray], float],
                 b: int = 1000, seed: int = 0, level: float = 0.95
                 ) -> tuple[float, float]:
    """Seeded percentile bootstrap of an arbitrary statistic."""
    arr = np.asarray(samples, dtype=np.float64)
    if len(arr) < 2:
        raise GenselectError("bootstrap needs >= 2 samples")
    if b < 100:
        raise GenselectError("bootstrap needs b >= 100")
    rng = np.random.default_rng(seed)
    stats = np.empty(b)
    for i in range(b):
        stats[i] = statistic(arr[rng.integers(len(arr), size=len(arr))])
    alpha = 1.0 - level
    lo, hi = np.percentile(stats, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    return float(lo), float(hi)


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
    """Rank correlation with average ranks for ties."""
    if len(x) != len(y):
        raise GenselectError("length mismatch")
    if len(x) < 2:
        raise GenselectError("need >= 2 points")
    rx, ry = rankdata(x), rankdata(y)
    return float(np.corrcoef(rx, ry)[0, 1])


def two_proportion_chisq(k1: int, n1: int, k2: int, n2: int) -> TestResult:
    """2x2 chi-square without continuity correction, plus a CI on the difference."""
    if n1 < 1 or n2 < 1 or not (0 <= k1 <= n1 and 0 <= k2 <= n2):
        raise GenselectError("invalid 2x2 counts")
    p1, p2 = k1 / n1, k2 / n2
    diff = p1 - p2
    half = Z975 * math.sqrt(p1 * (1 - p1) / n1 + p2 * (1 - p2) / n2)
    ci = (diff - half, diff + half)
    pooled = (k1 + k2) / (n1 + n2)
    if pooled in (0.0, 1.0):
        return TestResult(statistic=0.0, p_value=1.0, ci=ci, df=1.0)
    chi2 = 0.0
    for k, n in ((k1, n1), (k2, n2)):
        for obs, exp in ((k, n * pooled), (n - k, n * (1 - pooled))):
            chi2 += (obs - exp) ** 2 / exp
    return TestResult(statistic=chi2, p_value=float(chdtrc(1, chi2)), ci=ci, df=1.0)


def min_detectable_effect(n_per_group: int, power: float = 0.80,
                          alpha: float = 0.05) -> float:
    """Smallest bias-corrected effect a two-group design detects.

    Normal-approximation d = (z_{1-alpha/2} + z_power) sqrt(2/n), then the
    small-sample correction applied as a divisor to land on the g scale.
    """
    if n_per_group < 2:
        raise GenselectError("n_per_group must be >= 2")
    if not (0 < power < 1 and 0 < alpha < 1):
        raise GenselectError("power and alpha must be in (0, 1)")
    d = (float(ndtri(1 - alpha / 2)) + float(ndtri(power))) * math.sqrt(2.0 / n_per_group)
    return d / _hedges_j(2 * n_per_group)


def power_for_effect(g: float, n_per_group: int, alpha: float = 0.05) -> float:
    """Power of the two-group design against a true effect of size g."""
    if n_per_group < 2:
        raise GenselectError("n_per_group must be >= 2")
    d = g * _hedges_j(2 * n_per_group)
    z = abs(d) / math.sqrt(2.0 / n_per_group) - float(ndtri(1 - alpha / 2))
    return float(ndtr(z))


def logit_reanalysis(spec: DesignMatrixSpec, epsilon: float = 1e-3) -> dict:
    """Refit the dummy regression on the logit scale and compare signs."""
    if not epsilon > 0:
        raise GenselectError("epsilon must be > 0")
    raw = ols_hc3(spec)
    y = np.clip(spec.response(), epsilon, 1.0 - epsilon)
    z = np.log(y / (1.0 - y))
    names = ("intercept",) + spec.dummy_columns()
    logit_fit = _fit_ols_hc3(spec.design(), z, names)

    def sign(v: float) -> int:
        return 0 if abs(v) < 1e-12 else (1 if v > 0 else -1)

    agreement = all(
        sign(raw.coefficients[name]) == sign(logit_fit.coefficients[name])
        for name in spec.dummy_columns()
    )
    return {"coefficients": logit_fit.coefficients, "sign_agreement": agreement,
            "fit": logit_fit}
