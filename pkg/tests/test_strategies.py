import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from deal_al import harness
from deal_al.distributions import BetaParams
from deal_al.kde import KernelConfig, evidence, log_evidence, parzen_posterior
from deal_al.risk import tuv
from deal_al.strategies import (
    EmptyPoolError,
    EvidenceCache,
    Oracle,
    PoolState,
    Strategy,
    deal_select,
    ers_select,
    initialize,
    rs_select,
    select,
    tuv_scores,
    us_select,
)


def brute_ers(X, labeled, labels, h, delta):
    """Exhaustive one-step lookahead with explicit loops over candidates and pool."""
    d = X.shape[1]
    unl = [i for i in range(len(X)) if i not in labeled]

    def k(a, b):
        return 2 ** (d / 2) * np.exp(-np.sum((a - b) ** 2) / (2 * h * h))

    def q(i, extra):
        kp = kn = 0.0
        for j, y in list(zip(labeled, labels)) + extra:
            if y == 1:
                kp += k(X[i], X[j])
            else:
                kn += k(X[i], X[j])
        return (delta + kp) / (2 * delta + kp + kn)

    best, best_cost = None, np.inf
    for c in unl:
        qc = q(c, [])
        cost = 0.0
        for y, w in ((1, qc), (-1, 1 - qc)):
            others = [u for u in unl if u != c]
            risk = sum(min(q(u, [(c, y)]), 1 - q(u, [(c, y)])) for u in others) / len(others)
            cost += w * risk
        if cost < best_cost - 1e-15:
            best, best_cost = c, cost
    return best


def state_with_labels(X, labeled, labels, h=None):
    cfg = None if h is None else KernelConfig(h, X.shape[1])
    s = PoolState(X, cfg)
    for i, y in zip(labeled, labels):
        s.add_label(i, y)
    return s


class TestPoolState:
    def test_partition(self):
        X = np.random.default_rng(0).normal(size=(8, 2))
        s = state_with_labels(X, [3, 1], [1, -1])
        np.testing.assert_array_equal(s.unlabeled, [0, 2, 4, 5, 6, 7])
        np.testing.assert_array_equal(s.labeled_X, X[[3, 1]])
        assert s.has_both_classes()
        with pytest.raises(ValueError):
            s.add_label(3, 1)

    def test_density_immutable(self):
        s = PoolState(np.random.default_rng(0).normal(size=(5, 2)))
        with pytest.raises(ValueError):
            s.density[0] = 1.0

    def test_cache_matches_direct_evidence(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(25, 3))
        s = state_with_labels(X, [0, 4, 9, 11], [1, -1, -1, 1])
        ev = evidence(X, X[[0, 4, 9, 11]], [1, -1, -1, 1], s.cfg)
        np.testing.assert_allclose(s.cache.k_pos, ev.k_pos, rtol=1e-12)
        np.testing.assert_allclose(s.cache.k_neg, ev.k_neg, rtol=1e-12)
        lp, ln = log_evidence(X, X[[0, 4, 9, 11]], [1, -1, -1, 1], s.cfg)
        np.testing.assert_allclose(s.cache.log_k_pos, lp, rtol=1e-12)
        np.testing.assert_allclose(s.cache.log_k_neg, ln, rtol=1e-12)

    def test_evidence_cache_predict(self):
        X = np.array([[0.0], [1.0], [2.0]])
        cfg = KernelConfig(0.5, 1)
        c = EvidenceCache(X, cfg)
        np.testing.assert_array_equal(c.predict(), [-1, -1, -1])
        c.add(np.array([2.0]), 1)
        c.add(np.array([0.0]), -1)
        np.testing.assert_array_equal(c.predict(), [-1, -1, 1])


class TestDeal:
    def test_empty_labels_picks_densest(self):
        X = np.array([[0.0], [0.1], [0.2], [3.0], [5.0]])
        s = PoolState(X)
        assert deal_select(s) == int(np.argmax(s.density))
        assert deal_select(s) in (0, 1, 2)

    def test_matches_exhaustive_tuv(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(40, 2))
        s = state_with_labels(X, [0, 1, 2], [1, -1, 1])
        scores = []
        for i in s.unlabeled:
            ev = evidence(X[i], s.labeled_X, s.labeled_y, s.cfg)
            scores.append(tuv(BetaParams(0.5 + ev.k_pos, 0.5 + ev.k_neg), s.density[i]).tuv)
        assert deal_select(s) == int(s.unlabeled[int(np.argmax(scores))])
        np.testing.assert_allclose(tuv_scores(s), scores, rtol=1e-10)

    def test_tie_lowest_index(self):
        X = np.array([[1.0], [0.0], [0.0], [1.0]])
        s = PoolState(X)
        assert deal_select(s) == 0
        s.add_label(0, 1)
        s.add_label(3, -1)
        assert deal_select(s) == 1

    def test_empty_pool(self):
        s = state_with_labels(np.array([[0.0], [1.0]]), [0, 1], [1, -1])
        with pytest.raises(EmptyPoolError):
            deal_select(s)

    def test_xor_first_query_in_empty_quadrant(self):
        sc = harness.xor_dataset(seed=0)
        s = state_with_labels(sc.dataset.X, sc.initial_labeled, sc.dataset.y[sc.initial_labeled])
        scores = tuv_scores(s)
        best = s.unlabeled[np.argmax(scores)]
        assert sc.quadrant[best] == sc.empty_quadrant
        assert deal_select(s) == best


class TestUs:
    def test_picks_half(self):
        # the middle point sits exactly between one +1 and one -1 label
        X = np.array([[-1.0], [1.0], [0.0], [0.7], [-0.4]])
        s = state_with_labels(X, [0, 1], [-1, 1], h=0.5)
        assert us_select(s) == 2
        assert us_select(s, "regularized") == 2

    def test_smallest_margin(self):
        # candidates with posteriors 0.9, 0.6 and 0.2
        X = np.array([[-2.0], [2.0], [0.0], [0.0], [0.0]])
        s = PoolState(X, KernelConfig(1.0, 1))
        q = np.array([0.9, 0.6, 0.2])
        lp = np.log(q)
        ln = np.log1p(-q)
        s.add_label(0, 1)
        s.add_label(1, -1)
        s.cache.log_k_pos[2:] = lp
        s.cache.log_k_neg[2:] = ln
        assert us_select(s) == 3

    def test_xor_avoids_empty_quadrant(self):
        for seed in range(5):
            sc = harness.xor_dataset(seed=seed)
            s = state_with_labels(sc.dataset.X, sc.initial_labeled,
                                  sc.dataset.y[sc.initial_labeled])
            i = us_select(s)
            assert sc.quadrant[i] != sc.empty_quadrant
            # within one bandwidth of the current decision boundary, located as the
            # sign changes of the posterior on a fine grid
            g = np.linspace(-2.5, 2.5, 401)
            G = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
            q = parzen_posterior(G, s.labeled_X, s.labeled_y, s.cfg).reshape(401, 401) - 0.5
            flips = (np.sign(q[:, 1:]) != np.sign(q[:, :-1]))
            rows, cols = np.nonzero(flips)
            boundary = np.stack([g[cols], g[rows]], axis=1)
            dist = np.min(np.linalg.norm(boundary - sc.dataset.X[i], axis=1))
            assert dist <= s.cfg.bandwidth


class TestRs:
    def test_single(self):
        s = state_with_labels(np.array([[0.0], [1.0]]), [0], [1])
        assert rs_select(s, np.random.default_rng(0)) == 1

    def test_deterministic(self):
        s = PoolState(np.random.default_rng(0).normal(size=(20, 2)))
        a = [rs_select(s, np.random.default_rng(9)) for _ in range(3)]
        assert len(set(a)) == 1

    def test_uniform(self):
        s = PoolState(np.arange(4.0)[:, None])
        rng = np.random.default_rng(1)
        counts = np.bincount([rs_select(s, rng) for _ in range(10**5)], minlength=4)
        np.testing.assert_allclose(counts / 1e5, 0.25, atol=0.01)


class TestErs:
    def test_single(self):
        s = state_with_labels(np.array([[0.0], [1.0]]), [0], [1])
        assert ers_select(s, np.random.default_rng(0)) == 1

    def test_informative_candidate_wins(self):
        # a candidate at the heart of the unlabeled cluster drives its neighbours'
        # estimates to one side; a far outlier changes nothing
        X = np.array([[0.0], [0.05], [-0.05], [30.0]])
        s = PoolState(X, KernelConfig(0.5, 1))
        assert ers_select(s, np.random.default_rng(0)) == 0
        assert brute_ers(X, [], [], 0.5, 0.5) == 0

    @settings(max_examples=20, deadline=None)
    @given(seed=hst.integers(0, 2**32 - 1), m=hst.integers(3, 30), d=hst.integers(1, 3))
    def test_matches_brute_force(self, seed, m, d):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(m, d))
        n_lab = int(rng.integers(0, m - 1))
        labeled = [int(i) for i in rng.choice(m, size=n_lab, replace=False)]
        labels = [int(v) for v in rng.choice([-1, 1], size=n_lab)]
        h = float(rng.uniform(0.3, 1.5))
        s = state_with_labels(X, labeled, labels, h)
        got = ers_select(s, np.random.default_rng(seed), m, m)
        assert got == brute_ers(X, labeled, labels, h, 0.5)

    def test_subsample_is_seeded(self):
        X = np.random.default_rng(3).normal(size=(60, 2))
        s = state_with_labels(X, [0, 1], [1, -1])
        a = ers_select(s, np.random.default_rng(5), 10, 10)
        b = ers_select(s, np.random.default_rng(5), 10, 10)
        assert a == b


class TestInitialize:
    def test_two_queries_when_classes_alternate(self):
        X = np.arange(6.0)[:, None]
        labels = np.array([1, 1, 1, -1, -1, -1])
        s = PoolState(X)
        # find a seed whose first two draws hit different classes
        for seed in range(100):
            probe = PoolState(X)
            r = np.random.default_rng(seed)
            first = rs_select(probe, r)
            probe.add_label(first, labels[first])
            second = rs_select(probe, r)
            if labels[first] != labels[second]:
                break
        got = initialize(s, Strategy("rs"), np.random.default_rng(seed), Oracle(labels))
        assert got == [first, second]

    def test_until_both_classes(self):
        X = np.random.default_rng(0).normal(size=(50, 2))
        labels = np.where(np.arange(50) < 45, 1, -1)
        s = PoolState(X)
        q = initialize(s, Strategy("us"), np.random.default_rng(1), Oracle(labels))
        assert s.has_both_classes()
        assert labels[q[-1]] == -1
        assert all(labels[i] == 1 for i in q[:-1])

    def test_deal_has_no_random_phase(self):
        X = np.random.default_rng(0).normal(size=(10, 2))
        s = PoolState(X)
        assert initialize(s, Strategy("deal"), np.random.default_rng(0),
                          Oracle([1, -1] * 5)) == []
        assert select(s, Strategy("deal"), np.random.default_rng(0)) == int(np.argmax(s.density))

    def test_single_class(self):
        s = PoolState(np.zeros((3, 1)) + np.arange(3)[:, None])
        with pytest.raises(ValueError):
            initialize(s, Strategy("rs"), np.random.default_rng(0), Oracle([1, 1, 1]))


class TestStrategy:
    def test_names_and_validation(self):
        assert Strategy("deal").name == "DEAL"
        with pytest.raises(ValueError):
            Strategy("qbc")
        with pytest.raises(ValueError):
            Strategy("ers", candidate_subsample=0)
        with pytest.raises(ValueError):
            Strategy("us", us_margin="other")
