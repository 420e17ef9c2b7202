"""Bradley-Terry fitting over pairwise verdicts with judge bias correction.

Verdicts carry presentation order, so each judge gets a position-bias
offset b_k: the probability that item i (listed as item_a) beats item j
under judge k is sigma(a_i - a_j + b_k * d), with d = +1 when i was
presented first and -1 otherwise. Ties are coded as half a win for each
side. A small ridge penalty keeps separated data (all wins one way)
finite and pins the sum-to-zero identification.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DegenerateAgreementWarning

OUTCOMES = ("a_wins", "b_wins", "tie")


@dataclass(frozen=True)
class PairwiseVerdict:
    """One judge's preference between two items, with presentation order."""

    judge_id: str
    item_a: str
    item_b: str
    outcome: str
    presented_first: str
    task_id: str = ""

    def __post_init__(self):
        if self.item_a == self.item_b:
            raise ValueError("item_a and item_b must differ")
        if self.outcome not in OUTCOMES:
            raise ValueError(f"outcome must be one of {OUTCOMES}, got {self.outcome!r}")
        if self.presented_first not in (self.item_a, self.item_b):
            raise ValueError("presented_first must be item_a or item_b")

    def swapped(self) -> "PairwiseVerdict":
        """The same physical verdict with the a/b labels exchanged."""
        flip = {"a_wins": "b_wins", "b_wins": "a_wins", "tie": "tie"}
        return PairwiseVerdict(
            judge_id=self.judge_id,
            item_a=self.item_b,
            item_b=self.item_a,
            outcome=flip[self.outcome],
            presented_first=self.presented_first,
            task_id=self.task_id,
        )


@dataclass(frozen=True)
class BTConfig:
    max_iter: int = 100
    tol: float = 1e-9
    ridge: float = 1e-4

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")


@dataclass(frozen=True)
class BTFit:
    """Fitted abilities (sum-to-zero per connected component) and judge biases."""

    abilities: dict[str, float]
    judge_bias: dict[str, float]
    log_likelihood: float
    converged: bool
    iterations: int
    flags: tuple[str, ...] = ()
    objective_path: tuple[float, ...] = ()


@dataclass(frozen=True)
class JudgeDiagnostics:
    tie_rate: float
    verdict_count: int
    degenerate: bool


def _stable_components(verdicts, items):
    """Connected components of the comparison graph, via union-find."""
    parent = {it: it for it in items}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for v in verdicts:
        ra, rb = find(v.item_a), find(v.item_b)
        if ra != rb:
            parent[rb] = ra
    groups: dict[str, list[str]] = {}
    for it in items:
        groups.setdefault(find(it), []).append(it)
    return list(groups.values())


def _log_sigma(eta):
    # log sigmoid, numerically stable on both tails
    return -np.logaddexp(0.0, -eta)


def fit_bt(verdicts, config: BTConfig = BTConfig()) -> BTFit:
    """Maximize the tie-as-half-win BT likelihood with per-judge position bias.

    Damped Newton on the ridge-penalized negative log-likelihood. The
    ridge makes separated data finite and forces each connected
    component's abilities to sum to zero at the optimum. Disconnected
    comparison graphs are flagged; the block-diagonal Hessian makes the
    joint fit equivalent to independent per-component fits.
    """
    verdicts = list(verdicts)
    if not verdicts:
        raise ValueError("need at least one verdict")

    items = sorted({v.item_a for v in verdicts} | {v.item_b for v in verdicts})
    judges = sorted({v.judge_id for v in verdicts})
    item_idx = {it: i for i, it in enumerate(items)}
    judge_idx = {jd: i for i, jd in enumerate(judges)}
    n_items, n_judges = len(items), len(judges)
    n_par = n_items + n_judges

    ia = np.array([item_idx[v.item_a] for v in verdicts])
    ib = np.array([item_idx[v.item_b] for v in verdicts])
    jk = np.array([n_items + judge_idx[v.judge_id] for v in verdicts])
    d = np.array([1.0 if v.presented_first == v.item_a else -1.0 for v in verdicts])
    w = np.array(
        [1.0 if v.outcome == "a_wins" else 0.0 if v.outcome == "b_wins" else 0.5 for v in verdicts]
    )

    def data_ll(theta):
        eta = theta[ia] - theta[ib] + d * theta[jk]
        return float(np.sum(w * _log_sigma(eta) + (1.0 - w) * _log_sigma(-eta)))

    def objective(theta):
        return -data_ll(theta) + 0.5 * config.ridge * float(theta @ theta)

    theta = np.zeros(n_par)
    obj = objective(theta)
    path = [obj]
    converged = False
    iterations = 0
    flags = []

    for iterations in range(1, config.max_iter + 1):
        eta = theta[ia] - theta[ib] + d * theta[jk]
        p = expit(eta)
        resid = p - w  # d(NLL)/d(eta)
        grad = np.zeros(n_par)
        np.add.at(grad, ia, resid)
        np.add.at(grad, ib, -resid)
        np.add.at(grad, jk, d * resid)
        grad += config.ridge * theta

        if np.max(np.abs(grad)) < config.tol:
            converged = True
            iterations -= 1  # this pass did no update
            break

        v = p * (1.0 - p)
        hess = config.ridge * np.eye(n_par)
        np.add.at(hess, (ia, ia), v)
        np.add.at(hess, (ib, ib), v)
        np.add.at(hess, (jk, jk), v)
        np.add.at(hess, (ia, ib), -v)
        np.add.at(hess, (ib, ia), -v)
        np.add.at(hess, (ia, jk), d * v)
        np.add.at(hess, (jk, ia), d * v)
        np.add.at(hess, (ib, jk), -d * v)
        np.add.at(hess, (jk, ib), -d * v)

        step = np.linalg.solve(hess, grad)
        scale = 1.0
        for _ in range(40):  # backtracking: the penalized objective must drop
            candidate = theta - scale * step
            cand_obj = objective(candidate)
            if cand_obj <= obj + 1e-15:
                theta, obj = candidate, cand_obj
                break
            scale *= 0.5
        path.append(obj)
    else:
        flags.append("max_iter")

    components = _stable_components(verdicts, items)
    if len(components) > 1:
        flags.append("disconnected")
    # The ridge optimum is mean-centered per component; nail it exactly.
    for comp in components:
        idx = [item_idx[it] for it in comp]
        theta[idx] -= theta[idx].mean()

    if np.all(w == 0.5):
        flags.append("no_signal")

    abilities = {it: float(theta[item_idx[it]]) for it in items}
    judge_bias = {jd: float(theta[n_items + judge_idx[jd]]) for jd in judges}
    return BTFit(
        abilities=abilities,
        judge_bias=judge_bias,
        log_likelihood=data_ll(theta),
        converged=converged,
        iterations=iterations,
        flags=tuple(flags),
        objective_path=tuple(path),
    )


def bt_win_rate(fit: BTFit, cell_item: str, baseline_item: str) -> float:
    """Calibrated win probability sigma(a_cell - a_baseline); 0.5 is parity."""
    for item in (cell_item, baseline_item):
        if item not in fit.abilities:
            raise KeyError(f"unknown item {item!r} in BT fit")
    if cell_item == baseline_item:
        return 0.5
    return float(expit(fit.abilities[cell_item] - fit.abilities[baseline_item]))


def cohen_kappa(judge_x, judge_y) -> float:
    """Three-category (a_wins/b_wins/tie) Cohen's kappa between two judges.

    Lists must be aligned by (task, pair). When both judges concentrate
    on one shared category the chance-agreement denominator vanishes;
    that degenerate case returns 1.0 under perfect agreement and 0.0
    otherwise, with a warning.
    """
    x = [getattr(v, "outcome", v) for v in judge_x]
    y = [getattr(v, "outcome", v) for v in judge_y]
    if len(x) != len(y):
        raise ValueError("verdict lists are misaligned (unequal length)")
    if not x:
        raise ValueError("need at least one aligned verdict pair")
    n = len(x)
    po = sum(a == b for a, b in zip(x, y)) / n
    cats = sorted(set(x) | set(y))
    pe = sum((x.count(c) / n) * (y.count(c) / n) for c in cats)
    if pe >= 1.0 - 1e-15:
        warnings.warn(
            "both judges concentrate on one category; kappa denominator degenerate",
            DegenerateAgreementWarning,
            stacklevel=2,
        )
        return 1.0 if po >= 1.0 - 1e-15 else 0.0
    return (po - pe) / (1.0 - pe)


def mean_pairwise_kappa(judges) -> float:
    """Mean Cohen's kappa over all unordered pairs of judges' verdict lists."""
    judges = list(judges)
    if len(judges) < 2:
        raise ValueError("need at least 2 judges")
    kappas = [cohen_kappa(a, b) for a, b in itertools.combinations(judges, 2)]
    return float(np.mean(kappas))


def judge_diagnostics(verdicts, threshold: float = 0.95, min_count: int = 100) -> JudgeDiagnostics:
    """Tie-rate degeneracy screen for one judge's verdicts.

    Degenerate means the judge returns ties at or above `threshold` over
    at least `min_count` verdicts: no discriminative signal, but enough
    evidence that it is not small-sample noise.
    """
    outcomes = [getattr(v, "outcome", v) for v in verdicts]
    count = len(outcomes)
    tie_rate = (sum(o == "tie" for o in outcomes) / count) if count else 0.0
    return JudgeDiagnostics(
        tie_rate=tie_rate,
        verdict_count=count,
        degenerate=tie_rate >= threshold and count >= min_count,
    )
