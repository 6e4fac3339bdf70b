"""Two species phylogenies that random LGT makes indistinguishable.

T' is a complete binary tree with unit edge times and one LGT rate on every
edge.  T'' rewires the four depth-2 vertices a, b, c, d: in T' the cherries
above them are {a, b} and {c, d}, in T'' they are {a, c} and {b, d}.  Vertex
ids, edge times and rates are shared, so one event stream drives both trees
(the coupled process).  Below depth 2 the trees agree, so the gene forests
hanging below a, b, c, d always match; when transfers from a single donor
among a..d overwrite the other three, the whole gene trees match as well.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .lgt import LgtEvent, apply_events, sample_events
from .rng import derive_rng
from .species import _complete_binary, _label_leaves
from .tree import Location, SpeciesPhylogeny, bipartitions


@dataclass(frozen=True)
class CoupledPair:
    first: SpeciesPhylogeny
    second: SpeciesPhylogeny
    abcd: tuple  # vertex ids of a, b, c, d

    @property
    def height(self) -> float:
        return float(self.first.times[self.first.leaves[0]])


def build_coupled_pair(n: int, per_edge: float = 0.0) -> CoupledPair:
    """The rewired pair on ``n`` leaves; ``per_edge`` is the LGT weight per edge."""
    if n < 16 or n & (n - 1):
        raise InputError("the coupled pair needs n a power of two, at least 16")
    parent = _complete_binary(n)
    labels = _label_leaves(parent)
    lam = [0.0] + [float(per_edge)] * (len(parent) - 1)
    length = [0.0] + [1.0] * (len(parent) - 1)
    first = SpeciesPhylogeny(parent, length, labels, lam=lam)
    u1, u2 = first.children[first.root]
    a, b = first.children[u1]
    c, d = first.children[u2]
    rewired = list(parent)
    rewired[b], rewired[c] = u2, u1
    second = SpeciesPhylogeny(rewired, length, labels, lam=lam)
    return CoupledPair(first, second, (a, b, c, d))


def good_event(events, abcd, window=(1.0, 2.0)) -> bool:
    """Three consecutive transfers among a..d from one donor to the other three.

    Only events inside the time window of the a..d edges that touch one of
    those edges are considered, in time order.
    """
    lo, hi = window
    group = set(abcd)
    seq = [ev for ev in events if lo < ev.t < hi
           and (ev.recipient.edge in group or ev.donor.edge in group)]
    for i in range(len(seq) - 2):
        trio = seq[i:i + 3]
        donors = {ev.donor.edge for ev in trio}
        if len(donors) != 1:
            continue
        (z,) = donors
        if z in group and {ev.recipient.edge for ev in trio} == group - {z}:
            return True
    return False


def injected_triple(pair: CoupledPair, times=(1.2, 1.5, 1.8)) -> list:
    """a->d, a->c, a->b at the given times (donor a)."""
    a, b, c, d = pair.abcd
    start = pair.first.edge_start
    out = []
    for t, r in zip(times, (d, c, b)):
        out.append(LgtEvent(t, Location(r, t - start[r]), Location(a, t - start[a]), kind="injected"))
    return out


def deep_clusters(gene, height: float, depth: float = 2.0) -> frozenset:
    """Leaf sets of gene vertices strictly below the given depth.

    A vertex's depth is ``height`` minus its path length to any descendant
    leaf, which is exact for traced genes whose lengths are times.
    """
    to_leaf = np.zeros(len(gene))
    for v in gene.postorder:
        kids = gene.children[v]
        if kids:
            to_leaf[v] = to_leaf[kids[0]] + gene.length[kids[0]]
    out = set()
    for v in range(len(gene)):
        if height - to_leaf[v] > depth + 1e-9:
            out.add(frozenset(gene.clusters[v]))
    return frozenset(out)


def topology_key(gene) -> frozenset:
    return bipartitions(gene)


@dataclass
class CouplingTrial:
    trial: int
    good: list          # per-gene good-event indicator
    subtree_identical: list  # per-gene identity below a..d
    multiset_equal: bool
    events: int


@dataclass
class CouplingReport:
    n: int
    lam: float
    genes: int
    trials: list = field(default_factory=list)

    @property
    def coincidence_rate(self) -> float:
        return float(np.mean([t.multiset_equal for t in self.trials]))

    @property
    def good_event_rate(self) -> float:
        return float(np.mean([g for t in self.trials for g in t.good]))

    @property
    def subtree_identity_always(self) -> bool:
        return all(all(t.subtree_identical) for t in self.trials)

    def summary(self) -> dict:
        return {"n": self.n, "lambda": self.lam, "genes": self.genes,
                "trials": len(self.trials), "coincidence_rate": self.coincidence_rate,
                "good_event_rate": self.good_event_rate,
                "subtree_identity_always": self.subtree_identity_always,
                "inverse_log_n": 1.0 / math.log(self.n)}


def nonrecoverability_demo(n: int = 16, lam: float = 240.0, N: int = 10, trials: int = 50,
                           seed: int = 0) -> CouplingReport:
    """Run the coupled process; ``lam`` is the expected event count per gene."""
    pair = build_coupled_pair(n, lam / (2 * n - 2))
    H = pair.height
    report = CouplingReport(n, lam, N)
    for k in range(trials):
        good, same_below, keys1, keys2, count = [], [], Counter(), Counter(), 0
        for i in range(N):
            events = sample_events(pair.first, rng=derive_rng(seed, k, i))
            count += len(events)
            g1 = apply_events(pair.first, events)
            g2 = apply_events(pair.second, events)
            good.append(good_event(events, pair.abcd))
            same_below.append(deep_clusters(g1, H) == deep_clusters(g2, H))
            keys1[topology_key(g1)] += 1
            keys2[topology_key(g2)] += 1
        report.trials.append(CouplingTrial(k, good, same_below, keys1 == keys2, count))
    return report
