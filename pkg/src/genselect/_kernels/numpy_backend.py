"""Pure-numpy implementations of the Monte Carlo reduction kernels.

This is the fallback backend used when the compiled extension is not
available (or when ``GENSELECT_KERNEL=numpy`` forces it). Every function
takes pre-drawn random arrays, so the compiled and numpy backends produce
the same results for the same inputs: integer outputs match exactly,
float reductions to ~1e-12.
"""

import numpy as np

NAME = "numpy"


def rowmax_mean_std(q):
    """Mean and sample std (ddof=1) of per-row maxima of a (trials, n) array."""
    q = np.ascontiguousarray(q, dtype=np.float64)
    m = q.max(axis=1)
    mean = float(m.mean())
    sd = float(m.std(ddof=1)) if m.size > 1 else 0.0
    return mean, sd


def rowargmax(q):
    """Index of the first maximal entry in each row of a (trials, n) array."""
    q = np.ascontiguousarray(q, dtype=np.float64)
    return q.argmax(axis=1).astype(np.int64)


def plurality_winners(votes, n_candidates, tie_u):
    """Plurality winner per row of a (trials, voters) index array.

    Ties are broken uniformly: among the k tied candidates (ascending
    index order) the floor(tie_u * k)-th is chosen, tie_u in [0, 1).
    """
    votes = np.ascontiguousarray(votes, dtype=np.int64)
    tie_u = np.ascontiguousarray(tie_u, dtype=np.float64)
    trials, voters = votes.shape
    counts = np.zeros((trials, n_candidates), dtype=np.int64)
    rows = np.repeat(np.arange(trials), voters)
    np.add.at(counts, (rows, votes.ravel()), 1)
    tied = counts == counts.max(axis=1, keepdims=True)
    n_tied = tied.sum(axis=1)
    pick = np.minimum((tie_u * n_tied).astype(np.int64), n_tied - 1)
    hit = (np.cumsum(tied, axis=1) == (pick + 1)[:, None]) & tied
    return hit.argmax(axis=1).astype(np.int64)


def cjt_correct_count(mix_u, shared_u, vote_u, p, rho):
    """Correct-majority count for the common-shock correlated jury model.

    Per trial: if mix_u < rho all jurors copy one shared draw (correct
    iff shared_u < p), otherwise each juror votes independently
    (vote_u[j] < p) and the majority must be correct. n odd, no vote ties.
    """
    vote_u = np.ascontiguousarray(vote_u, dtype=np.float64)
    n = vote_u.shape[1]
    shared_correct = shared_u < p
    indep_correct = (vote_u < p).sum(axis=1) > n // 2
    correct = np.where(mix_u < rho, shared_correct, indep_correct)
    return int(correct.sum())
