"""Random LGT on a species phylogeny and the gene trees it produces.

A gene tree is built by tracing every leaf's gene lineage backward in time.
The lineage climbs its species edge; when it meets the recipient location of
an LGT event it jumps to that event's donor location and keeps climbing from
there.  Lineages that reach the same species location merge.  This matches
applying the transfers forward in time as subtree prune-and-regraft moves.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import HighwaySpecError, InputError, ModelViolationError
from .rng import derive_rng
from .tree import GeneTree, Location, SpeciesPhylogeny, location_time, restrict

TIME_RTOL = 1e-9
DIRECTIONS = ("fixed01", "fixed10", "perGeneUniform")


@dataclass(frozen=True)
class LgtParams:
    R: float = math.inf
    p: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.R > 0:
            raise InputError("donor radius R must be positive")
        if not 0 < self.p <= 1:
            raise InputError("sampling probability p must lie in (0, 1]")


@dataclass(frozen=True)
class LgtEvent:
    """Transfer at time ``t``: the gene below ``recipient`` is replaced by a
    copy of the gene at ``donor``."""

    t: float
    recipient: Location
    donor: Location
    kind: str = "random"
    highway: int = -1


def sample_events(tree: SpeciesPhylogeny, R: float = math.inf, rng=None,
                  return_discarded: bool = False):
    """Draw one gene's random LGT events, sorted by time.

    The count is Poisson with mean the total LGT weight, recipient edges are
    chosen in proportion to their weight with a uniform offset, and donors
    are uniform over the other lineages alive at that time whose MRCA with
    the recipient lies within time ``R``.  Events with no eligible donor are
    dropped; their number is returned when ``return_discarded`` is set.
    """
    rng = derive_rng(0) if rng is None else derive_rng(rng)
    w = np.asarray(tree.edge_weight)
    total = float(w.sum())
    count = int(rng.poisson(total)) if total > 0 else 0
    if count == 0:
        return ([], 0) if return_discarded else []
    n = len(tree)
    rec = rng.choice(n, size=count, p=w / total)
    tau = np.asarray(tree.length)
    start = np.asarray(tree.edge_start)
    end = np.asarray(tree.times)
    off = rng.random(count) * tau[rec]
    t = start[rec] + off
    alive = (start[None, :] < t[:, None]) & (t[:, None] <= end[None, :])
    alive[np.arange(count), rec] = False
    if math.isfinite(R):
        alive &= (t[:, None] - tree.lca_time[rec]) <= R
    k = alive.sum(axis=1)
    u = rng.random(count)
    pick = np.minimum((u * k).astype(np.int64), np.maximum(k - 1, 0))
    cum = np.cumsum(alive, axis=1)
    donor = np.argmax(cum > pick[:, None], axis=1)
    events = []
    for i in np.argsort(t, kind="stable"):
        if k[i] == 0:
            continue
        d = int(donor[i])
        events.append(LgtEvent(float(t[i]), Location(int(rec[i]), float(off[i])),
                               Location(d, float(t[i] - start[d]))))
    discarded = int((k == 0).sum())
    return (events, discarded) if return_discarded else events


def _check_event(tree, ev):
    tx = location_time(tree, ev.recipient)
    ty = location_time(tree, ev.donor)
    scale = max(1.0, abs(ev.t))
    if abs(tx - ty) > TIME_RTOL * scale or abs(tx - ev.t) > TIME_RTOL * scale:
        raise ModelViolationError(
            f"event at t={ev.t} joins non-contemporaneous locations ({tx} vs {ty})")
    for x in (ev.recipient, ev.donor):
        tau = tree.length[x.edge]
        if x.offset <= TIME_RTOL * tau or x.offset >= tau * (1 - TIME_RTOL):
            raise ModelViolationError(f"event at t={ev.t} sits on a speciation time")


def apply_events(tree: SpeciesPhylogeny, events: Sequence[LgtEvent], leaves=None,
                 rates=None) -> GeneTree:
    """Gene tree over ``leaves`` (default: every leaf) after the given events.

    ``rates`` optionally multiplies elapsed time per species edge to give
    substitution-scaled branch lengths.  Degree-2 vertices are kept; the
    result is cut at the MRCA of the traced lineages.
    """
    events = list(events)
    for a, b in zip(events, events[1:]):
        if b.t < a.t:
            raise InputError("events must be sorted by time")
    for ev in events:
        _check_event(tree, ev)
    rate = np.ones(len(tree)) if rates is None else np.asarray(rates, dtype=float)
    times = np.asarray(tree.times)
    root = tree.root
    # per-edge markers sorted by time: (t, is_recipient, event index)
    marks = [[] for _ in range(len(tree))]
    for i, ev in enumerate(events):
        marks[ev.recipient.edge].append((ev.t, 1, i))
        marks[ev.donor.edge].append((ev.t, 0, i))
    for m in marks:
        m.sort()
    mark_t = [[x[0] for x in m] for m in marks]

    def position(node):
        kind, idx = node
        if kind == "v":
            return idx, times[idx]
        return events[idx].donor.edge, events[idx].t

    def step(node):
        """Next node above ``node`` and the branch length to it."""
        e, s = position(node)
        if e == root:
            return None, 0.0
        j = bisect.bisect_left(mark_t[e], s) - 1
        if j >= 0:
            t, _, i = marks[e][j]
            up = ("d", i)
        else:
            t, up = times[tree.parent[e]], ("v", tree.parent[e])
        return up, (s - t) * rate[e]

    names = [tree.labels[v] for v in tree.leaves] if leaves is None else list(leaves)
    unknown = set(names) - tree.taxa
    if unknown:
        raise InputError(f"unknown taxa: {sorted(unknown)}")
    ids, parent, length, labels = {}, [], [], []

    def add(node, label=""):
        ids[node] = len(parent)
        parent.append(-1)
        length.append(0.0)
        labels.append(label)

    for name in names:
        node = ("v", tree.leaf_vertex[name])
        add(node, name)
        while True:
            up, ell = step(node)
            if up is None:
                break
            fresh = up not in ids
            if fresh:
                add(up)
            parent[ids[node]] = ids[up]
            length[ids[node]] = ell
            if not fresh:
                break
            node = up
    if any(p >= 0 and not ell > 0 for p, ell in zip(parent, length)):
        raise ModelViolationError("an event sits exactly on a speciation time")
    return restrict(GeneTree(parent, length, labels), names, suppress=False)


def sample_taxa(full: GeneTree, p: float, rng=None, taxa=None) -> GeneTree:
    """Keep each eligible leaf independently with probability ``p``.

    Eligible leaves are ``taxa`` (default: all leaves of ``full``), visited
    in sorted order, one uniform draw each.  Fewer than two survivors gives
    an empty gene tree.
    """
    if not 0 < p <= 1:
        raise InputError("sampling probability p must lie in (0, 1]")
    rng = derive_rng(0) if rng is None else derive_rng(rng)
    pool = sorted(full.taxa if taxa is None else taxa)
    keep = [x for x, u in zip(pool, rng.random(len(pool))) if u < p]
    if len(keep) < 2:
        return GeneTree.empty()
    return restrict(full, keep, suppress=True)


# ---------------------------------------------------------------------------
# highways
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Highway:
    """A pair of species edges exchanging one transfer in a fraction of genes.

    ``direction`` is ``fixed01`` (donor edge0, recipient edge1), ``fixed10``
    or ``perGeneUniform``.
    """

    edge0: int
    edge1: int
    gamma: float
    direction: str = "perGeneUniform"

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise HighwaySpecError("highway gene fraction must lie in (0, 1]")
        if self.direction not in DIRECTIONS:
            raise HighwaySpecError(f"unknown direction policy {self.direction!r}")
        if self.edge0 == self.edge1:
            raise HighwaySpecError("a highway needs two distinct edges")


def shared_window(tree: SpeciesPhylogeny, e0: int, e1: int):
    lo = max(tree.edge_start[e0], tree.edge_start[e1])
    hi = min(tree.times[e0], tree.times[e1])
    return float(lo), float(hi)


def highway_cycle(tree: SpeciesPhylogeny, h: Highway):
    """Vertices and edges on the cycle a highway closes through the tree."""
    p0, p1 = tree.parent[h.edge0], tree.parent[h.edge1]
    w = tree.lca(p0, p1)
    verts, edges = set(), {h.edge0, h.edge1}
    for p in (p0, p1):
        while p != w:
            verts.add(p)
            edges.add(p)
            p = tree.parent[p]
    verts.add(w)
    return verts, edges


def validate_highways(tree: SpeciesPhylogeny, highways: Sequence[Highway]) -> None:
    """Check the separation and disjointness conditions highway inference needs."""
    cycles = []
    for b, h in enumerate(highways):
        for e in (h.edge0, h.edge1):
            if e == tree.root or not 0 <= e < len(tree):
                raise HighwaySpecError(f"highway {b}: invalid edge {e}")
            if tree.edge_depth[e] < 3:
                raise HighwaySpecError(f"highway {b}: edge {e} is or touches a root edge")
        lo, hi = shared_window(tree, h.edge0, h.edge1)
        if not lo < hi:
            raise HighwaySpecError(f"highway {b}: edges {h.edge0},{h.edge1} are never contemporaneous")
        p0, p1 = tree.parent[h.edge0], tree.parent[h.edge1]
        w = tree.lca(p0, p1)
        gap = int(tree.edge_depth[p0] + tree.edge_depth[p1] - 2 * tree.edge_depth[w])
        if gap < 2:
            raise HighwaySpecError(f"highway {b}: edges separated by {gap} < 2 edges")
        cycles.append(highway_cycle(tree, h))
    for i in range(len(cycles)):
        for j in range(i):
            if cycles[i][0] & cycles[j][0] or cycles[i][1] & cycles[j][1]:
                raise HighwaySpecError(f"highways {j} and {i} have overlapping cycles")


def random_highways(tree: SpeciesPhylogeny, B: int, gamma: float, rng=None,
                    direction: str = "perGeneUniform", tries: int = 1000) -> list:
    """``B`` highways on random edge pairs that pass ``validate_highways``."""
    rng = derive_rng(0) if rng is None else derive_rng(rng)
    deep = [e for e in tree.edges if tree.edge_depth[e] >= 3]
    chosen = []
    for _ in range(tries):
        if len(chosen) == B:
            return chosen
        if len(deep) < 2:
            break
        e0, e1 = (int(x) for x in rng.choice(deep, size=2, replace=False))
        cand = chosen + [Highway(e0, e1, gamma, direction)]
        try:
            validate_highways(tree, cand)
        except HighwaySpecError:
            continue
        chosen = cand
    if len(chosen) == B:
        return chosen
    raise HighwaySpecError(f"could not place {B} disjoint highways")


def highway_genes(n_genes: int, gamma: float, seed: int, index: int) -> np.ndarray:
    """The ceil(gamma N) genes carrying highway ``index``, fixed by the seed."""
    order = derive_rng(seed, 1, index).permutation(n_genes)
    m = min(n_genes, math.ceil(gamma * n_genes - 1e-12))
    return np.sort(order[:m])


def highway_event(tree: SpeciesPhylogeny, h: Highway, index: int, rng) -> LgtEvent:
    lo, hi = shared_window(tree, h.edge0, h.edge1)
    t = float(rng.uniform(lo, hi))
    if h.direction == "fixed01":
        forward = True
    elif h.direction == "fixed10":
        forward = False
    else:
        forward = bool(rng.random() < 0.5)
    donor, recipient = (h.edge0, h.edge1) if forward else (h.edge1, h.edge0)
    start = tree.edge_start
    return LgtEvent(t, Location(recipient, t - start[recipient]),
                    Location(donor, t - start[donor]), kind="highway", highway=index)


@dataclass
class GeneSample:
    gene: GeneTree
    events: list = field(default_factory=list)
    discarded: int = 0


def simulate_gene(tree: SpeciesPhylogeny, params: LgtParams, rng, extra_events=(),
                  rates=None) -> GeneSample:
    """One gene: random events, merged extra events, tracing, then sampling."""
    events, discarded = sample_events(tree, params.R, rng, return_discarded=True)
    if extra_events:
        events = sorted([*events, *extra_events], key=lambda ev: ev.t)
    full = apply_events(tree, events, rates=rates)
    gene = sample_taxa(full, params.p, rng, taxa=tree.extant_taxa)
    return GeneSample(gene, events, discarded)


def generate_gene_trees(tree: SpeciesPhylogeny, params: LgtParams, N: int,
                        highways: Sequence[Highway] = (), stream=(), rates=None,
                        details: bool = False):
    """``N`` independent gene trees, optionally with planted highways.

    Gene ``i`` draws from the stream (seed, *stream, 0, i), so any subset
    of genes can be regenerated on its own.  Highway gene subsets are fixed
    per (seed, *stream) and do not depend on the random events.
    """
    if N < 1:
        raise InputError("need at least one gene")
    highways = list(highways)
    if highways:
        validate_highways(tree, highways)
    carriers = [set(highway_genes(N, h.gamma, _mix(params.seed, stream), b).tolist())
                for b, h in enumerate(highways)]
    out = []
    for i in range(N):
        rng = derive_rng(params.seed, *stream, 0, i)
        extra = [highway_event(tree, h, b, rng)
                 for b, h in enumerate(highways) if i in carriers[b]]
        out.append(simulate_gene(tree, params, rng, extra, rates=rates))
    return out if details else [s.gene for s in out]


def _mix(seed, stream):
    if not stream:
        return seed
    return int(np.random.SeedSequence([seed, *stream]).generate_state(1)[0])


def write_event_log(path, samples: Sequence[GeneSample]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gene_id", "t", "recipient_edge", "recipient_offset",
                    "donor_edge", "donor_offset", "kind"])
        for g, s in enumerate(samples):
            for ev in s.events:
                kind = ev.kind if ev.kind == "random" else f"highway({ev.highway})"
                w.writerow([g, repr(ev.t), ev.recipient.edge, repr(ev.recipient.offset),
                            ev.donor.edge, repr(ev.donor.offset), kind])
