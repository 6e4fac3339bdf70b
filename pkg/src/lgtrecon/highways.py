"""Highway inference from sub-plurality quartet signal.

Four-tuples whose second most common split is frequent but not dominant are
flagged as suspect.  Suspects whose quartet trees share an edge along the
internal branch are grouped; each group should trace a path between the two
ends of one highway, and the edges hanging off the path ends locate it.

Edge sets on the reconstructed species topology are Python integers used as
bitmasks over edge ids (an edge is named by its child vertex).
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InputError
from .quartets import (QuartetFrequencyTable, plurality_cover, quad_splits, quartet_frequencies,
                       tree_from_cover)
from .tree import SPLIT_PAIRINGS, Tree, leaf_path_matrix


@dataclass(frozen=True)
class SuspectQuartetSet:
    """Four-tuples (rows of the table) with a strong non-plurality split."""

    taxa: tuple
    quads: np.ndarray   # (k, 4) taxon indices
    splits: np.ndarray  # the suspect split of each four-tuple
    gamma_lo: float

    def __len__(self):
        return len(self.splits)

    def names(self, i) -> tuple:
        return tuple(self.taxa[j] for j in self.quads[i])


def suspect_quartets(table: QuartetFrequencyTable, gamma_lo: float) -> SuspectQuartetSet:
    """Splits other than the plurality one with frequency in (gamma_lo/2, 1/2).

    When two splits of a four-tuple qualify, the more frequent one is kept
    (lower split code on a tie).
    """
    if not 0 < gamma_lo < 1:
        raise InputError("gamma_lo must lie in (0, 1)")
    f = table.freqs
    plural = np.argmax(table.counts, axis=1)
    ok = (f > gamma_lo / 2) & (f < 0.5) & (table.m > 0)[:, None]
    ok[np.arange(len(f)), plural] = False
    score = np.where(ok, f, -1.0)
    best = np.argmax(score, axis=1)
    keep = ok.any(axis=1)
    return SuspectQuartetSet(table.taxa, table.quads[keep], best[keep], gamma_lo)


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def root_paths(tree: Tree) -> list:
    """Bitmask of the edges between every vertex and the root."""
    rp = [0] * len(tree)
    for v in tree.preorder:
        p = tree.parent[v]
        if p >= 0:
            rp[v] = rp[p] | (1 << v)
    return rp


def edge_split(tree: Tree, e: int) -> frozenset:
    """Bipartition of an edge, as the side without the smallest taxon."""
    side = tree.clusters[e]
    if min(tree.taxa) in side:
        side = tree.taxa - side
    return side


@dataclass
class SharedEdgeGraph:
    species: Tree
    suspects: SuspectQuartetSet
    species_splits: np.ndarray  # species split code per suspect
    internal: list              # internal-branch edge mask per suspect
    span: list                  # quartet-tree edge mask per suspect
    components: list            # lists of suspect indices
    rp: list = field(repr=False, default_factory=list)

    def adjacent(self, i: int, j: int) -> bool:
        return i != j and bool(self.internal[i] & self.internal[j])

    def shared(self, i: int, j: int) -> int:
        return self.internal[i] & self.internal[j]


def shared_edge_graph(Q: SuspectQuartetSet, species: Tree) -> SharedEdgeGraph:
    """Group suspects whose species quartet trees share an internal edge.

    Components are found by union-find over species edges: every suspect
    merges the edges of its internal branch, so two suspects land in one
    component exactly when a chain of shared edges links them.
    """
    missing = set(Q.taxa) - species.taxa
    if missing:
        raise InputError(f"species tree lacks taxa {sorted(missing)}")
    rp = root_paths(species)
    leaf = [species.leaf_vertex[x] for x in Q.taxa]
    codes = quad_splits(leaf_path_matrix(species, Q.taxa, unit=True), Q.quads) \
        if len(Q) else np.zeros(0, dtype=np.int64)
    internal, span = [], []
    for row, s in zip(Q.quads, codes):
        v = [rp[leaf[i]] for i in row]
        i, j, k, l = SPLIT_PAIRINGS[int(s)]
        internal.append((v[i] ^ v[k]) & (v[j] ^ v[l]))
        span.append((v[0] | v[1] | v[2] | v[3]) & ~(v[0] & v[1] & v[2] & v[3]))
    up = list(range(len(species)))

    def find(x):
        while up[x] != x:
            up[x] = up[up[x]]
            x = up[x]
        return x

    for mask in internal:
        edges = list(_bits(mask))
        for e in edges[1:]:
            a, b = find(edges[0]), find(e)
            if a != b:
                up[max(a, b)] = min(a, b)
    groups = {}
    for i, mask in enumerate(internal):
        groups.setdefault(find(next(_bits(mask))), []).append(i)
    components = sorted(groups.values(), key=lambda g: g[0])
    return SharedEdgeGraph(species, Q, codes, internal, span, components, rp)


@dataclass(frozen=True)
class HighwayCall:
    """A recovered highway on the reconstructed species topology.

    ``edge0``/``edge1`` are edge ids of that topology.  When ``oriented`` is
    set, ``edge0`` is the donor and ``edge1`` the recipient.
    """

    component: int
    edge0: int
    edge1: int
    oriented: bool
    support: int
    splits: tuple = ()


@dataclass(frozen=True)
class ComponentAbort:
    component: int
    reason: str
    support: int


@dataclass
class HighwayReport:
    calls: list
    aborts: list

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["component_id", "edge0_child_vertex", "edge1_child_vertex",
                        "oriented_flag", "support"])
            for c in self.calls:
                w.writerow([c.component, c.edge0, c.edge1, int(c.oriented), c.support])


def _path_ends(species: Tree, P: set):
    """The two end vertices of edge set ``P`` if it is a simple path, else None."""
    deg = Counter()
    for e in P:
        deg[e] += 1
        deg[species.parent[e]] += 1
    if any(d > 2 for d in deg.values()) or len(deg) != len(P) + 1:
        return None
    ends = [v for v, d in deg.items() if d == 1]
    if len(ends) != 2:
        return None
    # connectivity: walk from one end along P
    seen, v, prev = 1, ends[0], None
    while v != ends[1]:
        nxt = [e for e in species.incident_edges(v) if e in P and e != prev]
        if not nxt:
            return None
        prev = nxt[0]
        v = species.parent[prev] if prev == v else prev
        seen += 1
    if seen != len(P) + 1:
        return None
    return tuple(sorted(ends))


def _on_path(rp, u, v, e) -> bool:
    return bool((rp[u] ^ rp[v]) >> e & 1)


def locate_highways(graph: SharedEdgeGraph) -> HighwayReport:
    species, Q, rp = graph.species, graph.suspects, graph.rp
    leaf = [species.leaf_vertex[x] for x in Q.taxa]
    calls, aborts = [], []
    for cid, W in enumerate(graph.components):
        count = Counter()
        for i in W:
            count.update(_bits(graph.internal[i]))
        P = {e for e, c in count.items() if c >= 2}
        if not P:
            aborts.append(ComponentAbort(cid, "no edge shared by two suspects", len(W)))
            continue
        ends = _path_ends(species, P)
        if ends is None:
            aborts.append(ComponentAbort(cid, "shared edges do not form a path", len(W)))
            continue
        sides = []
        for u in ends:
            adj = [e for e in species.incident_edges(u) if e not in P]
            if len(adj) != 2:
                break
            sides.append(adj)
        if len(sides) != 2:
            aborts.append(ComponentAbort(cid, "path ends at a leaf", len(W)))
            continue
        passing = []
        for x in sides[0]:
            for y in sides[1]:
                pair = (1 << x) | (1 << y)
                if all(graph.span[i] & pair for i in W):
                    passing.append((x, y))
        if not passing:
            aborts.append(ComponentAbort(cid, "no edge pair touches every suspect", len(W)))
            continue
        if len(passing) == 1:
            x, y = passing[0]
            calls.append(HighwayCall(cid, x, y, False, len(W),
                                     (edge_split(species, x), edge_split(species, y))))
            continue
        common = set(passing[0]).intersection(*map(set, passing[1:]))
        if len(common) != 1:
            aborts.append(ComponentAbort(cid, "passing pairs do not share one edge", len(W)))
            continue
        (r,) = common
        rs = 0 if r in sides[0] else 1
        u_r, u_d = ends[rs], ends[1 - rs]
        all_four = sum(1 << e for e in sides[0] + sides[1])
        votes = Counter()
        for i in W:
            if graph.span[i] & all_four != all_four:
                continue
            X = [leaf[j] for j in Q.quads[i]]
            below = [k for k, v in enumerate(X) if _on_path(rp, v, u_r, r)]
            if len(below) != 1:
                continue
            k = below[0]
            a, b, c, d = SPLIT_PAIRINGS[int(Q.splits[i])]
            sister = {a: b, b: a, c: d, d: c}[k]
            for e in sides[1 - rs]:
                if _on_path(rp, X[sister], u_d, e):
                    votes[e] += 1
        top = votes.most_common(2)
        if not top or (len(top) == 2 and top[0][1] == top[1][1]):
            aborts.append(ComponentAbort(cid, "donor edge could not be resolved", len(W)))
            continue
        donor = top[0][0]
        calls.append(HighwayCall(cid, donor, r, True, len(W),
                                 (edge_split(species, donor), edge_split(species, r))))
    return HighwayReport(calls, aborts)


def road_roller(genes: Sequence[Tree], taxa=None, gamma_lo: float = 0.1):
    """Species topology by quartet plurality plus the highways it can locate."""
    table = quartet_frequencies(genes, taxa)
    species = tree_from_cover(plurality_cover(table))
    graph = shared_edge_graph(suspect_quartets(table, gamma_lo), species)
    return species, locate_highways(graph)


def planted_splits(tree, edge0: int, edge1: int) -> frozenset:
    """Canonical split pair of a highway given on the species phylogeny."""
    ext_taxa = tree.extant_taxa
    ref = min(ext_taxa)
    out = []
    for e in (edge0, edge1):
        side = tree.clusters[e] & ext_taxa
        if ref in side:
            side = ext_taxa - side
        out.append(frozenset(side))
    return frozenset(out)
