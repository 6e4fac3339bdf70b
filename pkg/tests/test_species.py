import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lgtrecon.errors import GenerationError, InputError
from lgtrecon.newick import parse_newick
from lgtrecon.species import (BoundedRatesParams, YuleParams, generate_bounded_rates,
                              generate_yule, lgt_weights, subtree_weight, weight_metric)

from oracles import brute_upsilon4, spanning_weight


def height(sp):
    return float(sp.times[sp.leaves[0]])


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.floats(0.2, 5.0), st.integers(0, 10_000))
def test_yule_shape(n, nu, seed):
    sp = generate_yule(YuleParams(n, nu, seed=seed))
    assert sp.n_leaves == n
    assert sp.is_ultrametric()
    assert len(sp) == 2 * n - 1
    assert sorted(sp.taxa, key=int) == [str(i) for i in range(1, n + 1)]


@pytest.mark.parametrize("n,nu", [(2, 1.0), (5, 2.0), (20, 1.0)])
def test_yule_height_law(n, nu):
    # height is a sum of independent Exp(k nu) waits, k = 2..n
    mean = sum(1 / (k * nu) for k in range(2, n + 1))
    var = sum(1 / (k * nu) ** 2 for k in range(2, n + 1))
    reps = 2000
    h = np.array([height(generate_yule(YuleParams(n, nu, seed=s))) for s in range(reps)])
    assert abs(h.mean() - mean) < 4 * math.sqrt(var / reps)


def test_yule_is_seed_deterministic():
    a = generate_yule(YuleParams(12, 1.0, 0.3, 0.5, seed=9))
    b = generate_yule(YuleParams(12, 1.0, 0.3, 0.5, seed=9))
    assert a.newick() == b.newick() and a.lam == b.lam


def test_rates_lie_in_band():
    sp = generate_yule(YuleParams(30, lambda_bar=2.0, rho_lambda=0.25, seed=1))
    lam = np.array([sp.lam[e] for e in sp.edges])
    assert lam.min() >= 0.5 and lam.max() <= 2.0
    assert sp.lam[sp.root] == 0.0


@pytest.mark.parametrize("kw", [dict(n=1), dict(n=4, nu=0), dict(n=4, lambda_bar=-1),
                                dict(n=4, rho_lambda=0)])
def test_yule_rejects_bad_params(kw):
    with pytest.raises(InputError):
        YuleParams(**kw)


def test_complete_binary():
    sp = generate_bounded_rates(BoundedRatesParams(16, tau_bar=1.5, lambda_bar=0.2,
                                                   shape="completeBinary"))
    assert sp.n_leaves == 16
    assert all(sp.length[e] == 1.5 for e in sp.edges)
    assert height(sp) == pytest.approx(6.0)
    assert lgt_weights(sp).extant == pytest.approx(30 * 1.5 * 0.2)
    with pytest.raises(InputError):
        BoundedRatesParams(12, shape="completeBinary")


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 60), st.floats(0.3, 0.5), st.integers(0, 10_000))
def test_random_ultrametric_respects_bounds(n, rho, seed):
    p = BoundedRatesParams(n, tau_bar=2.0, rho_tau=rho, seed=seed)
    sp = generate_bounded_rates(p)
    tau = np.array([sp.length[e] for e in sp.edges])
    assert sp.n_leaves == n
    assert sp.is_ultrametric()
    assert tau.min() >= rho * 2.0 * (1 - 1e-9)
    assert tau.max() <= 2.0 * (1 + 1e-9)


def test_infeasible_bounds_give_up():
    # equal edge times cannot make three leaves ultrametric
    with pytest.raises(GenerationError):
        generate_bounded_rates(BoundedRatesParams(3, rho_tau=1.0))


def test_weights_on_hand_tree():
    sp = parse_newick("((a:1,b:1):1,(c:1,d:1):1);")
    sp = sp.with_rates([0, 1, 2, 3, 4, 5, 6])
    # vertex ids in preorder: 0 root, 1 (ab), 2 a, 3 b, 4 (cd), 5 c, 6 d
    w = lgt_weights(sp)
    assert w.total == pytest.approx(21.0)
    assert w.extant == pytest.approx(21.0)
    assert w.upsilon4 == pytest.approx(21.0)
    assert w.upsilon4_exact
    taxa, D, _ = weight_metric(sp)
    assert D[taxa.index("a"), taxa.index("d")] == pytest.approx(1 + 2 + 4 + 6)
    assert w.upsilon2 == pytest.approx(3 + 1 + 4 + 6)
    assert subtree_weight(sp, ["a", "b", "c"]) == pytest.approx(2 + 3 + 1 + 4 + 5)


@settings(max_examples=20, deadline=None)
@given(st.integers(4, 10), st.integers(0, 10_000))
def test_upsilon4_matches_brute_force(n, seed):
    sp = generate_yule(YuleParams(n, lambda_bar=1.0, rho_lambda=0.2, seed=seed))
    assert lgt_weights(sp).upsilon4 == pytest.approx(brute_upsilon4(sp))


def test_subtree_weight_matches_edge_sets():
    sp = generate_yule(YuleParams(9, lambda_bar=1.0, rho_lambda=0.3, seed=2))
    X = ["1", "4", "6", "9"]
    leaves = [sp.leaf_vertex[x] for x in X]
    assert subtree_weight(sp, X) == pytest.approx(spanning_weight(sp, leaves))


def test_extinct_edges_count_in_total_only():
    sp = parse_newick("((a:2,x!x:1):1,b:3);").with_rates([0, 1, 1, 1, 1])
    w = lgt_weights(sp)
    assert w.total == pytest.approx(1 + 2 + 1 + 3)
    assert w.extant == pytest.approx(3 + 3)


def test_upsilon4_falls_back_to_bound_on_large_trees():
    sp = generate_yule(YuleParams(70, lambda_bar=1.0, seed=0))
    w = lgt_weights(sp)
    assert not w.upsilon4_exact
    assert w.upsilon4 >= w.upsilon2
