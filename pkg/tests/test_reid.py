import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from svs.errors import RecordRejected
from svs.server.reid import FIRST_GLOBAL_ID, Gallery, normalize

from oracles import cosine_clusters, partition


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


@settings(max_examples=40)
@given(st.integers(1, 6), st.integers(1, 8), st.integers(0, 2**32))
def test_well_separated_identities_match_pairwise_oracle(k, reps, seed):
    rng = np.random.default_rng(seed)
    dim = 64
    # orthogonal identities; small noise keeps within-identity cosine far above theta
    basis = np.linalg.qr(rng.normal(size=(dim, k)))[0].T
    feats, truth = [], []
    for i in rng.permutation(np.repeat(np.arange(k), reps)):
        feats.append(basis[i] + rng.normal(0, 0.02, size=dim))
        truth.append(int(i))
    g = Gallery(0.7, horizon=1e9)
    ids = [g.assign(f, t=float(j)) for j, f in enumerate(feats)]
    assert partition(ids) == cosine_clusters(feats, 0.7) == partition(truth)
    assert sorted(set(ids)) == list(range(FIRST_GLOBAL_ID, FIRST_GLOBAL_ID + k))


def test_ids_start_at_1001_and_survive_clear():
    g = Gallery()
    assert g.assign(unit([1, 0]), 0.0) == 1001
    assert g.assign(unit([0, 1]), 0.0) == 1002
    g.clear()
    assert len(g) == 0
    assert g.assign(unit([1, 0]), 1.0) == 1003


def test_threshold_is_inclusive():
    g = Gallery(theta=0.7)
    g.assign(unit([1, 0]), 0.0)
    c = 0.7
    assert g.assign(np.array([c, np.sqrt(1 - c * c)]), 1.0) == 1001
    g2 = Gallery(theta=0.7)
    g2.assign(unit([1, 0]), 0.0)
    c = 0.699
    assert g2.assign(np.array([c, np.sqrt(1 - c * c)]), 1.0) == 1002


def test_tie_goes_to_lower_id():
    g = Gallery(theta=0.5)
    g.assign(unit([1, 1, 0]), 0.0)
    g.assign(unit([1, -1, 0]), 0.0)
    g.assign(unit([0, 0, 1]), 0.0)
    assert g.assign(unit([1, 0, 0]), 1.0) == 1001


def test_horizon_bounds_matching():
    g = Gallery(horizon=600.0)
    g.assign(unit([1, 0]), 0.0)
    assert g.assign(unit([1, 0]), 600.0) == 1001
    assert g.assign(unit([1, 0]), 1200.5) == 1002
    ids, sims = g.similarities(unit([1, 0]), 1200.5)
    assert list(ids) == [1002] and sims[0] == pytest.approx(1.0)


def test_representative_is_running_mean_direction():
    g = Gallery(theta=0.5)
    a, b = unit([1, 0.2]), unit([1, -0.2])
    g.assign(a, 0.0, camera_id=1)
    g.assign(b, 1.0, camera_id=2)
    (ident,) = g.identities()
    assert np.allclose(ident.representative_feature, unit(a + b))
    assert ident.cameras_seen == {1, 2} and ident.observations == 2 and ident.last_seen == 1.0


def test_compaction_keeps_counter_and_recent_identities():
    g = Gallery(theta=0.99, horizon=1.0, dim=64)
    rng = np.random.default_rng(0)
    for t in range(200):
        g.assign(rng.normal(size=64), float(t))
    assert g.next_id == 1201
    # compaction runs when storage fills, so the live set stays bounded
    assert len(g) <= 64
    assert min(i.last_seen for i in g.identities()) >= 199 - 64 - 2.0


def test_rejections():
    with pytest.raises(RecordRejected):
        normalize(np.zeros(4))
    g = Gallery()
    g.assign(np.ones(4), 0.0)
    with pytest.raises(RecordRejected):
        g.assign(np.ones(5), 0.0)
    with pytest.raises(ValueError):
        Gallery(theta=2.0)
