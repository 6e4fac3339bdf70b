"""Tree data structures and the metric/topological primitives built on them.

All trees are stored as parent-pointer arrays over integer vertex ids.  The
edge above a vertex is identified by that (child) vertex id, so ``length[v]``
is the length of the edge joining ``v`` to ``parent[v]``.  The root has
parent ``-1`` and a length of ``0``.

Unrooted trees (gene trees, reconstructed topologies) use the same layout;
their root is an arbitrary internal vertex and every comparison goes through
bipartitions or path lengths, which do not see it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DegenerateTopologyError, InputError

ULTRAMETRIC_RTOL = 1e-9


class Tree:
    """Immutable vertex-labelled tree.

    Parameters
    ----------
    parent : sequence of int
        Parent of each vertex, ``-1`` for the root.
    length : sequence of float
        Length of the edge above each vertex (ignored for the root).
    labels : sequence of str or None
        Taxon name of each leaf; internal labels are kept but unused.
    rooted : bool
        Whether the root carries meaning.
    """

    rooted = True

    def __init__(self, parent, length, labels, rooted=None):
        self.parent = tuple(int(p) for p in parent)
        self.length = tuple(float(x) for x in length)
        self.labels = tuple(labels)
        if rooted is not None:
            self.rooted = bool(rooted)
        n = len(self.parent)
        if len(self.length) != n or len(self.labels) != n:
            raise InputError("parent, length and labels must have equal size")
        roots = [v for v, p in enumerate(self.parent) if p < 0]
        if n and len(roots) != 1:
            raise InputError(f"tree must have exactly one root, found {len(roots)}")
        if any(p >= n for p in self.parent):
            raise InputError("parent id out of range")
        if n and len(self.preorder) != n:
            raise InputError("parent array contains a cycle")
        names = [self.labels[v] for v in self.leaves]
        if any(not name for name in names):
            raise InputError("every leaf needs a label")
        if len(set(names)) != len(names):
            raise InputError("duplicate leaf labels")

    def __repr__(self):
        return f"{type(self).__name__}(n_leaves={self.n_leaves}, n_vertices={len(self)})"

    def __len__(self):
        return len(self.parent)

    def _replace(self, parent, length, labels):
        """Build a tree of the same kind on new arrays."""
        return Tree(parent, length, labels, rooted=self.rooted)

    @cached_property
    def root(self) -> int:
        for v, p in enumerate(self.parent):
            if p < 0:
                return v
        return -1

    @cached_property
    def children(self) -> tuple:
        kids = [[] for _ in self.parent]
        for v, p in enumerate(self.parent):
            if p >= 0:
                kids[p].append(v)
        return tuple(tuple(k) for k in kids)

    @cached_property
    def preorder(self) -> tuple:
        if not self.parent:
            return ()
        order, stack = [], [self.root]
        seen = 0
        while stack:
            v = stack.pop()
            order.append(v)
            seen += 1
            if seen > len(self.parent):
                break
            stack.extend(reversed(self.children[v]))
        return tuple(order)

    @cached_property
    def postorder(self) -> tuple:
        return tuple(reversed(self.preorder))

    @cached_property
    def leaves(self) -> tuple:
        return tuple(v for v in range(len(self.parent)) if not self.children[v])

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    @cached_property
    def taxa(self) -> frozenset:
        return frozenset(self.labels[v] for v in self.leaves)

    @cached_property
    def leaf_vertex(self) -> dict:
        """Map from taxon name to vertex id."""
        return {self.labels[v]: v for v in self.leaves}

    @cached_property
    def depth(self) -> np.ndarray:
        """Summed edge length from the root to every vertex."""
        d = np.zeros(len(self.parent))
        for v in self.preorder:
            p = self.parent[v]
            if p >= 0:
                d[v] = d[p] + self.length[v]
        d.setflags(write=False)
        return d

    @cached_property
    def edge_depth(self) -> np.ndarray:
        """Number of edges from the root to every vertex."""
        d = np.zeros(len(self.parent), dtype=np.int64)
        for v in self.preorder:
            p = self.parent[v]
            if p >= 0:
                d[v] = d[p] + 1
        d.setflags(write=False)
        return d

    @cached_property
    def clusters(self) -> tuple:
        """Leaf-label set below every vertex."""
        out = [frozenset()] * len(self.parent)
        for v in self.postorder:
            if self.children[v]:
                out[v] = frozenset().union(*(out[c] for c in self.children[v]))
            else:
                out[v] = frozenset([self.labels[v]])
        return tuple(out)

    def ancestors(self, v: int) -> list:
        """Vertices from ``v`` up to the root, inclusive."""
        path = [v]
        while self.parent[path[-1]] >= 0:
            path.append(self.parent[path[-1]])
        return path

    def lca(self, u: int, v: int) -> int:
        du, dv = self.edge_depth[u], self.edge_depth[v]
        while du > dv:
            u, du = self.parent[u], du - 1
        while dv > du:
            v, dv = self.parent[v], dv - 1
        while u != v:
            u, v = self.parent[u], self.parent[v]
        return u

    def is_ancestor(self, u: int, v: int) -> bool:
        """True when ``u`` lies on the path from ``v`` to the root."""
        while v >= 0:
            if v == u:
                return True
            v = self.parent[v]
        return False

    def incident_edges(self, v: int) -> list:
        """Edge ids touching vertex ``v`` (edges are named by child vertex)."""
        edges = list(self.children[v])
        if self.parent[v] >= 0:
            edges.append(v)
        return edges

    def newick(self, lengths=True) -> str:
        from .newick import emit_newick

        return emit_newick(self, lengths=lengths)


class GeneTree(Tree):
    """Unrooted gene tree with positive branch lengths.

    Degree-2 vertices are allowed; they mark the points where the gene
    lineage moves from one species edge to the next.  An empty gene tree
    (fewer than two leaves) is a valid object, flagged by :attr:`is_empty`.
    """

    rooted = False

    def __init__(self, parent, length, labels, rooted=None):
        super().__init__(parent, length, labels, rooted=False)
        for v, p in enumerate(self.parent):
            if p >= 0 and not self.length[v] > 0:
                raise InputError(f"gene tree edge above vertex {v} has nonpositive length")
        for v in range(len(self.parent)):
            deg = len(self.children[v]) + (self.parent[v] >= 0)
            if deg > 3:
                raise InputError(f"gene tree vertex {v} has degree {deg}")

    def _replace(self, parent, length, labels):
        return GeneTree(parent, length, labels)

    @classmethod
    def empty(cls) -> "GeneTree":
        return cls((), (), ())

    @property
    def is_empty(self) -> bool:
        return self.n_leaves < 2


class SpeciesPhylogeny(Tree):
    """Rooted binary species phylogeny with speciation times and LGT rates.

    ``length`` holds the inter-speciation time of every edge.  ``lam`` holds
    the LGT rate of every edge (events per unit time); zero is accepted so
    that LGT-free controls can be expressed.  ``extinct`` lists the labels of
    extinct leaves.  The restriction to extant leaves must be ultrametric.
    """

    rooted = True

    def __init__(self, parent, length, labels, lam=None, extinct=(), check_ultrametric=True):
        super().__init__(parent, length, labels, rooted=True)
        n = len(self.parent)
        if lam is None:
            lam = [0.0] * n
        self.lam = tuple(float(x) for x in lam)
        if len(self.lam) != n:
            raise InputError("lam must have one entry per vertex")
        self.extinct = frozenset(extinct)
        if not self.extinct <= self.taxa:
            raise InputError(f"unknown extinct labels: {sorted(self.extinct - self.taxa)}")
        if len(self.extinct) == self.n_leaves:
            raise InputError("a phylogeny needs at least one extant leaf")
        if self.n_leaves >= 2 and len(self.children[self.root]) != 2:
            raise InputError("root must have degree 2")
        for v in range(n):
            k = len(self.children[v])
            if v != self.root and k not in (0, 2):
                raise InputError(f"internal vertex {v} must have degree 3")
            if v != self.root:
                if not self.length[v] > 0:
                    raise InputError(f"edge {v} has nonpositive time")
                if not (self.lam[v] >= 0 and math.isfinite(self.lam[v])):
                    raise InputError(f"edge {v} has invalid LGT rate {self.lam[v]}")
        if check_ultrametric and not self.is_ultrametric():
            raise InputError("extant phylogeny is not ultrametric")

    def _replace(self, parent, length, labels, lam=None):
        return SpeciesPhylogeny(parent, length, labels, lam=lam,
                                extinct=[x for x in self.extinct if x in set(labels)])

    @property
    def tau(self) -> tuple:
        return self.length

    @property
    def times(self) -> np.ndarray:
        """Time from the root to every vertex."""
        return self.depth

    @cached_property
    def extant_leaves(self) -> tuple:
        return tuple(v for v in self.leaves if self.labels[v] not in self.extinct)

    @cached_property
    def extant_taxa(self) -> frozenset:
        return frozenset(self.labels[v] for v in self.extant_leaves)

    @cached_property
    def edges(self) -> tuple:
        """All edge ids (every vertex except the root)."""
        return tuple(v for v in range(len(self.parent)) if v != self.root)

    @cached_property
    def edge_weight(self) -> np.ndarray:
        """LGT weight of every edge: rate times duration (0 at the root)."""
        w = np.array(self.lam) * np.array(self.length)
        w[self.root] = 0.0
        w.setflags(write=False)
        return w

    @cached_property
    def edge_start(self) -> np.ndarray:
        """Time at the upper (parent) end of every edge; +inf for the root."""
        s = np.full(len(self.parent), np.inf)
        for v in self.edges:
            s[v] = self.times[self.parent[v]]
        s.setflags(write=False)
        return s

    @cached_property
    def lca_matrix(self) -> np.ndarray:
        """LCA vertex id for every vertex pair."""
        n = len(self.parent)
        anc = np.zeros((n, n), dtype=bool)
        for v in self.preorder:
            p = self.parent[v]
            if p >= 0:
                anc[v] = anc[p]
            anc[v, v] = True
        # deepest common ancestor: maximise edge depth over the common set
        order = np.argsort(-np.asarray(self.edge_depth), kind="stable")
        common = anc[:, None, order] & anc[None, :, order]
        out = order[np.argmax(common, axis=2)]
        out.setflags(write=False)
        return out

    @cached_property
    def lca_time(self) -> np.ndarray:
        t = self.times[self.lca_matrix]
        t.setflags(write=False)
        return t

    def is_ultrametric(self, rtol=ULTRAMETRIC_RTOL) -> bool:
        t = self.times[list(self.extant_leaves)]
        if len(t) < 2:
            return True
        return float(t.max() - t.min()) <= rtol * max(float(t.max()), 1e-300)

    def with_rates(self, lam) -> "SpeciesPhylogeny":
        return SpeciesPhylogeny(self.parent, self.length, self.labels, lam=lam,
                                extinct=self.extinct, check_ultrametric=False)

    def scale_rates(self, factor: float) -> "SpeciesPhylogeny":
        return self.with_rates([x * factor for x in self.lam])


class Location(NamedTuple):
    """A point on a species phylogeny: edge id and time below the edge's top."""

    edge: int
    offset: float


def location_time(tree: SpeciesPhylogeny, x: Location) -> float:
    """Time from the root to location ``x``."""
    if x.edge == tree.root or not 0 <= x.edge < len(tree):
        raise InputError(f"invalid edge {x.edge}")
    tau = tree.length[x.edge]
    if not -1e-12 * tau <= x.offset <= tau * (1 + 1e-12):
        raise InputError(f"offset {x.offset} outside edge {x.edge} of length {tau}")
    return float(tree.times[tree.parent[x.edge]] + x.offset)


def mrca_time(tree: SpeciesPhylogeny, x: Location, y: Location) -> float:
    """Time distance between two locations (sum of times to their MRCA)."""
    tx, ty = location_time(tree, x), location_time(tree, y)
    if x.edge == y.edge:
        return abs(tx - ty)
    w = tree.lca(x.edge, y.edge)
    if w == x.edge:  # y lies below x's edge, so x is an ancestor of y
        return ty - tx
    if w == y.edge:
        return tx - ty
    tw = float(tree.times[w])
    return (tx - tw) + (ty - tw)


def contemporaneous(tree: SpeciesPhylogeny, x: Location, y: Location, tol=1e-9) -> bool:
    tx, ty = location_time(tree, x), location_time(tree, y)
    return abs(tx - ty) <= tol * max(1.0, abs(tx))


# ---------------------------------------------------------------------------
# restriction and suppression
# ---------------------------------------------------------------------------


def restrict(tree: Tree, taxa: Iterable[str], suppress: bool = True):
    """Subtree spanned by the paths between leaves in ``taxa``.

    With ``suppress`` set, vertices left with a single child are removed and
    their edge lengths are summed.  LGT rates of merged species edges are
    combined so that the LGT weight of the merged edge is the sum of its
    parts.  Unrooted trees additionally lose a degree-2 root.
    """
    taxa = set(taxa)
    if not taxa:
        raise InputError("cannot restrict to an empty taxon set")
    unknown = taxa - tree.taxa
    if unknown:
        raise InputError(f"unknown taxa: {sorted(unknown)}")
    target = len(taxa)
    count = np.zeros(len(tree), dtype=np.int64)
    for v in tree.postorder:
        if not tree.children[v]:
            count[v] = tree.labels[v] in taxa
        else:
            count[v] = sum(count[c] for c in tree.children[v])
    top = next(v for v in tree.postorder if count[v] == target)
    keep = [v for v in tree.preorder if count[v] > 0 and (v == top or count[v] < target)]
    return _rebuild(tree, keep, top, suppress)


def _rebuild(tree: Tree, keep: Sequence[int], top: int, suppress: bool):
    keep_set = set(keep)
    parent = {v: (tree.parent[v] if v != top else -1) for v in keep}
    length = {v: (tree.length[v] if v != top else 0.0) for v in keep}
    is_species = isinstance(tree, SpeciesPhylogeny)
    weight = {v: tree.length[v] * tree.lam[v] for v in keep} if is_species else None
    kids = {v: [c for c in tree.children[v] if c in keep_set] for v in keep}
    if suppress:
        for v in keep:  # preorder, so parents are settled first
            if v != top and len(kids[v]) == 1:
                (c,) = kids[v]
                p = parent[v]
                parent[c] = p
                length[c] += length[v]
                if is_species:
                    weight[c] += weight[v]
                kids[p] = [c if x == v else x for x in kids[p]]
                del parent[v]
        if not tree.rooted:
            top = _drop_unrooted_root(top, parent, length, kids)
    order = [v for v in keep if v in parent]
    new_id = {v: i for i, v in enumerate(order)}
    new_parent = [new_id[parent[v]] if parent[v] >= 0 else -1 for v in order]
    new_length = [length[v] if parent[v] >= 0 else 0.0 for v in order]
    new_labels = [tree.labels[v] for v in order]
    if is_species:
        lam = [weight[v] / length[v] if parent[v] >= 0 else 0.0 for v in order]
        extinct = [x for x in tree.extinct if x in set(new_labels)]
        return SpeciesPhylogeny(new_parent, new_length, new_labels, lam=lam,
                                extinct=extinct, check_ultrametric=False)
    return tree._replace(new_parent, new_length, new_labels)


def _drop_unrooted_root(top, parent, length, kids):
    """Remove a root of degree 1 or 2 when an internal child can take over."""
    live = [c for c in kids[top] if c in parent]
    if len(live) == 1 and kids[live[0]]:
        (c,) = live
        parent[c] = -1
        del parent[top]
        return c
    if len(live) == 2:
        internal = [c for c in live if kids[c]]
        if internal:
            new_top = internal[0]
            other = live[1] if live[0] == new_top else live[0]
            parent[new_top] = -1
            parent[other] = new_top
            length[other] += length[new_top]
            kids[new_top] = kids[new_top] + [other]
            del parent[top]
            return new_top
    return top


def suppress_unary(tree: Tree):
    """Suppress every degree-2 vertex (the topology of the tree)."""
    if tree.n_leaves == 0:
        return tree
    return restrict(tree, tree.taxa, suppress=True)


def extant_phylogeny(tree: SpeciesPhylogeny) -> SpeciesPhylogeny:
    """Restriction to extant leaves, rooted at their MRCA, unary vertices suppressed."""
    return restrict(tree, tree.extant_taxa, suppress=True)


# ---------------------------------------------------------------------------
# bipartitions, quartets and path lengths
# ---------------------------------------------------------------------------


def bipartitions(tree: Tree, trivial: bool = False) -> frozenset:
    """Leaf bipartitions induced by the edges of ``tree``.

    Each bipartition is represented by the side that does not contain the
    smallest taxon label, which makes the set independent of rooting.
    """
    taxa = tree.taxa
    if not taxa:
        return frozenset()
    ref = min(taxa)
    n = len(taxa)
    out = set()
    for v in range(len(tree)):
        if v == tree.root:
            continue
        side = tree.clusters[v]
        if ref in side:
            side = taxa - side
        if trivial or 2 <= len(side) <= n - 2:
            out.add(side)
    return frozenset(out)


def rf_distance(t1: Tree, t2: Tree) -> int:
    """Robinson-Foulds distance: bipartitions found in exactly one tree."""
    if t1.taxa != t2.taxa:
        raise InputError("RF distance needs identical leaf sets")
    return len(bipartitions(t1) ^ bipartitions(t2))


SPLIT_PAIRINGS = ((0, 1, 2, 3), (0, 2, 1, 3), (0, 3, 1, 2))


@dataclass(frozen=True, order=True)
class Quartet:
    """A resolved split of four taxa.

    ``taxa`` is sorted; ``split`` is 0 for ab|cd, 1 for ac|bd and 2 for ad|bc
    in terms of that order.
    """

    taxa: tuple
    split: int

    def __post_init__(self):
        if len(self.taxa) != 4 or len(set(self.taxa)) != 4:
            raise InputError("a quartet needs four distinct taxa")
        if tuple(sorted(self.taxa)) != tuple(self.taxa):
            raise InputError("quartet taxa must be sorted")
        if self.split not in (0, 1, 2):
            raise InputError("split code must be 0, 1 or 2")

    @classmethod
    def from_pairs(cls, pair1, pair2) -> "Quartet":
        taxa = tuple(sorted([*pair1, *pair2]))
        a = taxa[0]
        partner = next(iter(set(pair1 if a in pair1 else pair2) - {a}))
        return cls(taxa, taxa.index(partner) - 1)

    @property
    def pairs(self) -> tuple:
        i, j, k, l = SPLIT_PAIRINGS[self.split]
        t = self.taxa
        return frozenset((t[i], t[j])), frozenset((t[k], t[l]))

    def sister(self, taxon: str) -> str:
        for pair in self.pairs:
            if taxon in pair:
                return next(iter(pair - {taxon}))
        raise InputError(f"{taxon} is not in {self}")

    def __str__(self):
        p, q = (sorted(x) for x in self.pairs)
        return f"{p[0]}{p[1]}|{q[0]}{q[1]}" if all(len(x) == 1 for x in self.taxa) \
            else f"{p[0]},{p[1]}|{q[0]},{q[1]}"


def split_code(d: np.ndarray) -> np.ndarray:
    """Resolve quartets from path lengths by the four-point condition.

    ``d`` has shape (..., 6) holding d_ab, d_ac, d_ad, d_bc, d_bd, d_cd.
    Returns the split code per row, or -1 when the minimum is not unique.
    """
    s = np.stack([d[..., 0] + d[..., 5], d[..., 1] + d[..., 4], d[..., 2] + d[..., 3]], axis=-1)
    code = np.argmin(s, axis=-1)
    smin = np.take_along_axis(s, code[..., None], axis=-1)[..., 0]
    unique = (s == smin[..., None]).sum(axis=-1) == 1
    return np.where(unique, code, -1)


def quartet_of(tree: Tree, taxa: Iterable[str]) -> Quartet:
    """The resolved quartet displayed by ``tree`` on four taxa."""
    X = tuple(sorted(set(taxa)))
    if len(X) != 4:
        raise InputError("quartet_of needs exactly four distinct taxa")
    missing = set(X) - tree.taxa
    if missing:
        raise InputError(f"taxa not in tree: {sorted(missing)}")
    vs = [tree.leaf_vertex[x] for x in X]
    dep = tree.edge_depth
    d = np.array([dep[u] + dep[v] - 2 * dep[tree.lca(u, v)] for u, v in combinations(vs, 2)])
    code = int(split_code(d))
    if code < 0:
        raise DegenerateTopologyError(f"restriction to {X} is unresolved")
    return Quartet(X, code)


def leaf_path_matrix(tree: Tree, taxa: Sequence[str], unit: bool = False) -> np.ndarray:
    """Path length between every pair of ``taxa`` (NaN where a taxon is absent).

    With ``unit`` each edge counts 1, which gives exact integer distances
    that are enough to read topology.
    """
    index = {x: i for i, x in enumerate(taxa)}
    n = len(taxa)
    out = np.full((n, n), np.nan)
    if tree.n_leaves == 0:
        return out
    dep = np.asarray(tree.edge_depth if unit else tree.depth, dtype=float)
    below = [None] * len(tree)
    for v in tree.postorder:
        kids = tree.children[v]
        if not kids:
            i = index.get(tree.labels[v])
            below[v] = np.array([v] if i is not None else [], dtype=np.int64)
            continue
        for c1, c2 in combinations(kids, 2):
            L1, L2 = below[c1], below[c2]
            if len(L1) and len(L2):
                block = dep[L1][:, None] + dep[L2][None, :] - 2 * dep[v]
                r1 = [index[tree.labels[u]] for u in L1]
                r2 = [index[tree.labels[u]] for u in L2]
                out[np.ix_(r1, r2)] = block
                out[np.ix_(r2, r1)] = block.T
        below[v] = np.concatenate([below[c] for c in kids])
    for x, i in index.items():
        if x in tree.taxa:
            out[i, i] = 0.0
    return out


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric leaf-pair distances with a zero diagonal.

    NaN off-diagonal entries mark pairs with no defined distance (for
    instance a saturated log-det estimate).
    """

    taxa: tuple
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        n = len(self.taxa)
        if v.shape != (n, n):
            raise InputError(f"matrix shape {v.shape} does not match {n} taxa")
        if len(set(self.taxa)) != n:
            raise InputError("duplicate taxa")
        if np.any(np.diag(v) != 0):
            raise InputError("diagonal must be zero")
        both = ~np.isnan(v)
        if not np.array_equal(both, both.T) or not np.allclose(v[both], v.T[both], rtol=1e-12, atol=0):
            raise InputError("distance matrix is not symmetric")
        if np.any(v[both] < 0):
            raise InputError("negative distance")
        v.setflags(write=False)
        object.__setattr__(self, "taxa", tuple(self.taxa))
        object.__setattr__(self, "values", v)

    def __getitem__(self, pair) -> float:
        a, b = pair
        return float(self.values[self.taxa.index(a), self.taxa.index(b)])

    def reorder(self, taxa: Sequence[str]) -> "DistanceMatrix":
        idx = [self.taxa.index(x) for x in taxa]
        return DistanceMatrix(tuple(taxa), self.values[np.ix_(idx, idx)])

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["", *self.taxa])
            for name, row in zip(self.taxa, self.values):
                w.writerow([name, *(repr(float(x)) for x in row)])

    @classmethod
    def from_csv(cls, path) -> "DistanceMatrix":
        import csv

        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        taxa = tuple(rows[0][1:])
        if [r[0] for r in rows[1:]] != list(taxa):
            raise InputError("row names must match the header")
        values = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
        return cls(taxa, values)


def tree_distance_matrix(tree: Tree, taxa: Sequence[str] | None = None) -> DistanceMatrix:
    """Path-length sums between all leaf pairs."""
    taxa = tuple(sorted(tree.taxa)) if taxa is None else tuple(taxa)
    return DistanceMatrix(taxa, leaf_path_matrix(tree, taxa))


def same_tree(t1: Tree, t2: Tree, atol: float = 1e-12) -> bool:
    """Structural equality up to vertex numbering, with lengths within ``atol``."""

    def canon(t, v):
        # key: nested-parenthesis string with children sorted
        if not t.children[v]:
            return repr(t.labels[v]), [t.length[v]]
        parts = sorted((canon(t, c) for c in t.children[v]), key=lambda x: x[0])
        key = "(" + ",".join(p[0] for p in parts) + ")"
        lens = [t.length[v]] + [x for p in parts for x in p[1]]
        return key, lens

    if len(t1) != len(t2) or t1.taxa != t2.taxa:
        return False
    if len(t1) == 0:
        return True
    k1, l1 = canon(t1, t1.root)
    k2, l2 = canon(t2, t2.root)
    l1[0] = l2[0] = 0.0
    return k1 == k2 and np.allclose(l1, l2, rtol=0, atol=atol)
