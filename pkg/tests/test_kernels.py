"""Backend-equivalence and correctness tests for the Monte Carlo kernels."""

import numpy as np
import pytest

from genselect import _kernels

HAS_COMPILED = "compiled" in _kernels.available_backends()

needs_compiled = pytest.mark.skipif(
    not HAS_COMPILED, reason="compiled kernel extension not built"
)


def random_inputs(seed):
    rng = np.random.default_rng(seed)
    q = rng.normal(0.3, 1.2, (257, 6))
    votes = rng.integers(0, 6, (113, 9)).astype(np.int64)
    tie_u = rng.random(113)
    mix_u = rng.random(501)
    shared_u = rng.random(501)
    vote_u = rng.random((501, 7))
    return q, votes, tie_u, mix_u, shared_u, vote_u


class TestNumpyBackend:
    def test_rowmax_mean_std_matches_numpy(self):
        q = np.arange(12.0).reshape(4, 3)
        mean, sd = _kernels.get_backend("numpy").rowmax_mean_std(q)
        rowmax = q.max(axis=1)
        assert mean == pytest.approx(rowmax.mean())
        assert sd == pytest.approx(rowmax.std(ddof=1))

    def test_rowmax_single_row_sd_zero(self):
        mean, sd = _kernels.get_backend("numpy").rowmax_mean_std(np.array([[1.0, 5.0]]))
        assert mean == 5.0
        assert sd == 0.0

    def test_rowargmax_first_max_wins(self):
        q = np.array([[1.0, 3.0, 3.0], [2.0, 1.0, 2.0]])
        idx = _kernels.get_backend("numpy").rowargmax(q)
        assert idx.tolist() == [1, 0]

    def test_plurality_brute_force(self):
        # Independent reimplementation: count, find tied leaders, pick by tie_u.
        rng = np.random.default_rng(17)
        votes = rng.integers(0, 4, (200, 5)).astype(np.int64)
        tie_u = rng.random(200)
        got = _kernels.get_backend("numpy").plurality_winners(votes, 4, tie_u)
        for r in range(200):
            counts = np.bincount(votes[r], minlength=4)
            leaders = np.flatnonzero(counts == counts.max())
            pick = min(int(tie_u[r] * len(leaders)), len(leaders) - 1)
            assert got[r] == leaders[pick]

    def test_cjt_counts_shared_and_independent_branches(self):
        # rho=1 forces every trial through the shared draw.
        mix_u = np.array([0.0, 0.5, 0.99])
        shared_u = np.array([0.1, 0.9, 0.5])
        vote_u = np.full((3, 3), 0.99)  # independent votes would all fail
        n_correct = _kernels.get_backend("numpy").cjt_correct_count(
            mix_u, shared_u, vote_u, 0.6, 1.0
        )
        assert n_correct == 2  # shared_u < 0.6 twice

    def test_cjt_independent_majority(self):
        mix_u = np.array([0.99])
        shared_u = np.array([0.0])
        vote_u = np.array([[0.1, 0.2, 0.9]])  # two of three correct at p=0.5
        n_correct = _kernels.get_backend("numpy").cjt_correct_count(
            mix_u, shared_u, vote_u, 0.5, 0.0
        )
        assert n_correct == 1


@needs_compiled
class TestBackendEquivalence:
    """Both backends consume identical pre-drawn arrays, so integer outputs
    must match exactly and float reductions to near machine precision."""

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_rowmax_mean_std(self, seed):
        q, *_ = random_inputs(seed)
        np_mean, np_sd = _kernels.get_backend("numpy").rowmax_mean_std(q)
        c_mean, c_sd = _kernels.get_backend("compiled").rowmax_mean_std(q)
        assert c_mean == pytest.approx(np_mean, abs=1e-12)
        assert c_sd == pytest.approx(np_sd, rel=1e-10)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_rowargmax(self, seed):
        q, *_ = random_inputs(seed)
        np_idx = _kernels.get_backend("numpy").rowargmax(q)
        c_idx = _kernels.get_backend("compiled").rowargmax(q)
        np.testing.assert_array_equal(np_idx, c_idx)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_plurality_winners(self, seed):
        _, votes, tie_u, *_ = random_inputs(seed)
        np_w = _kernels.get_backend("numpy").plurality_winners(votes, 6, tie_u)
        c_w = _kernels.get_backend("compiled").plurality_winners(votes, 6, tie_u)
        np.testing.assert_array_equal(np_w, c_w)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    @pytest.mark.parametrize("rho", [0.0, 0.35, 1.0])
    def test_cjt_correct_count(self, seed, rho):
        *_, mix_u, shared_u, vote_u = random_inputs(seed)
        np_n = _kernels.get_backend("numpy").cjt_correct_count(
            mix_u, shared_u, vote_u, 0.6, rho
        )
        c_n = _kernels.get_backend("compiled").cjt_correct_count(
            mix_u, shared_u, vote_u, 0.6, rho
        )
        assert np_n == c_n


class TestBackendSelection:
    def test_default_backend_exposed(self):
        assert _kernels.BACKEND in _kernels.available_backends()

    def test_unknown_backend_rejected(self):
        with pytest.raises(ValueError, match="numpy"):
            _kernels.get_backend("fortran")

    def test_module_level_functions_bound(self):
        q = np.array([[0.0, 1.0]])
        mean, sd = _kernels.rowmax_mean_std(q)
        assert mean == 1.0 and sd == 0.0
