"""Quartet frequencies, plurality covers and tree assembly from a cover."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb
from typing import Sequence

import numpy as np

from .errors import IncompatibleCoverError, InputError, UncoveredQuartetError
from .tree import SPLIT_PAIRINGS, Quartet, Tree, leaf_path_matrix

@lru_cache(maxsize=8)
def _quads_cached(n: int) -> np.ndarray:
    if n < 4:
        q = np.zeros((0, 4), dtype=np.int64)
    else:
        q = np.array(list(combinations(range(n), 4)), dtype=np.int64)
    q.setflags(write=False)
    return q


def all_quads(n: int) -> np.ndarray:
    """Every four-subset of range(n) as sorted rows, in lexicographic order."""
    return _quads_cached(n).copy()


def quad_splits(D: np.ndarray, quads: np.ndarray) -> np.ndarray:
    """Split code of every four-tuple under the tree metric ``D``.

    Rows involving a NaN distance (a taxon missing from the tree) get -1, as
    do rows where the four-point minimum is not unique.
    """
    a, b, c, d = quads.T
    s = np.stack([D[a, b] + D[c, d], D[a, c] + D[b, d], D[a, d] + D[b, c]], axis=-1)
    missing = np.isnan(s).any(axis=1)
    s[missing] = 0.0
    code = np.argmin(s, axis=1)
    smin = s[np.arange(len(s)), code]
    unique = (s == smin[:, None]).sum(axis=1) == 1
    return np.where(unique & ~missing, code, -1)


def _topology_metric(tree: Tree, taxa) -> np.ndarray:
    return leaf_path_matrix(tree, taxa, unit=True)


@dataclass(frozen=True)
class QuartetFrequencyTable:
    """Per four-tuple split counts over a gene set.

    ``quads`` indexes into ``taxa``; ``counts[i, s]`` is the number of genes
    displaying split ``s`` on four-tuple ``i``.
    """

    taxa: tuple
    quads: np.ndarray
    counts: np.ndarray

    @property
    def m(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def freqs(self) -> np.ndarray:
        m = self.m
        with np.errstate(invalid="ignore", divide="ignore"):
            f = self.counts / m[:, None]
        f[m == 0] = 0.0
        return f

    def index(self, X) -> int:
        """Row of four-tuple ``X`` (taxon names)."""
        pos = sorted(self.taxa.index(x) for x in X)
        n = len(self.taxa)
        # lexicographic rank of a 4-combination
        rank, prev = 0, -1
        for k, c in enumerate(pos):
            for v in range(prev + 1, c):
                rank += comb(n - 1 - v, 3 - k)
            prev = c
        return rank

    def names(self, row: int) -> tuple:
        return tuple(self.taxa[i] for i in self.quads[row])

    def to_csv(self, path, chosen=None) -> None:
        f = self.freqs
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["a", "b", "c", "d", "m", "f1", "f2", "f3", "chosen"])
            for i in range(len(self.quads)):
                ch = "" if chosen is None or chosen[i] < 0 else int(chosen[i]) + 1
                w.writerow([*self.names(i), int(self.m[i]),
                            *(repr(float(x)) for x in f[i]), ch])


def quartet_frequencies(genes: Sequence[Tree], taxa=None) -> QuartetFrequencyTable:
    """Count the split each gene displays on every four-tuple of ``taxa``.

    Each gene contributes through its edge-count path metric, so a whole
    gene is resolved in one vectorised pass; four-tuples with a taxon the
    gene lacks are skipped.
    """
    genes = list(genes)
    if taxa is None:
        taxa = sorted(set().union(*(g.taxa for g in genes))) if genes else []
    taxa = tuple(sorted(taxa))
    extra = set().union(*(g.taxa for g in genes)) - set(taxa) if genes else set()
    if extra:
        raise InputError(f"gene taxa outside the working set: {sorted(extra)}")
    quads = _quads_cached(len(taxa))
    counts = np.zeros((len(quads), 3), dtype=np.int64)
    rows = np.arange(len(quads))
    for g in genes:
        if g.n_leaves < 4:
            continue
        code = quad_splits(_topology_metric(g, taxa), quads)
        ok = code >= 0
        np.add.at(counts, (rows[ok], code[ok]), 1)
    return QuartetFrequencyTable(taxa, quads, counts)


@dataclass(frozen=True)
class QuartetCover:
    """One chosen split per four-tuple (-1 where no gene covered it)."""

    taxa: tuple
    quads: np.ndarray
    chosen: np.ndarray
    tied: np.ndarray

    def quartets(self):
        for row, s in zip(self.quads, self.chosen):
            if s >= 0:
                yield Quartet(tuple(self.taxa[i] for i in row), int(s))


def plurality_cover(table: QuartetFrequencyTable, strict: bool = True) -> QuartetCover:
    """Most frequent split per four-tuple, ties going to the lowest split code."""
    counts = table.counts
    chosen = np.argmax(counts, axis=1)
    top = counts[np.arange(len(counts)), chosen]
    tied = (counts == top[:, None]).sum(axis=1) > 1
    empty = table.m == 0
    if strict and empty.any():
        raise UncoveredQuartetError(table.names(int(np.argmax(empty))))
    chosen = np.where(empty, -1, chosen)
    return QuartetCover(table.taxa, table.quads, chosen, tied & ~empty)


def cover_of_tree(tree: Tree, taxa=None) -> QuartetCover:
    """The complete cover a binary tree displays."""
    taxa = tuple(sorted(tree.taxa if taxa is None else taxa))
    quads = all_quads(len(taxa))
    code = quad_splits(_topology_metric(tree, taxa), quads)
    return QuartetCover(taxa, quads, code, np.zeros(len(quads), dtype=bool))


def _dense_cover(n, quads, chosen) -> np.ndarray:
    """Q[a, b, c, d] is True when the cover holds ab|cd."""
    Q = np.zeros((n, n, n, n), dtype=bool)
    perm = np.array(SPLIT_PAIRINGS)[chosen]
    cols = np.take_along_axis(quads, perm, axis=1)
    a, b, c, d = cols.T
    for w, x, y, z in ((a, b, c, d), (b, a, c, d), (a, b, d, c), (b, a, d, c)):
        Q[w, x, y, z] = True
        Q[y, z, w, x] = True
    return Q


def tree_from_cover(cover: QuartetCover) -> Tree:
    """Binary unrooted tree agreeing with every quartet of a complete cover.

    Repeatedly joins a cherry: a pair (a, b) such that ab|cd is in the cover
    for every other pair c, d still active.  When no exact cherry exists the
    best-scoring pair is joined anyway and the final check below reports a
    violated quartet.  The result is verified against the whole cover.
    """
    taxa = cover.taxa
    n = len(taxa)
    if (cover.chosen < 0).any():
        row = int(np.argmax(cover.chosen < 0))
        raise UncoveredQuartetError(tuple(taxa[i] for i in cover.quads[row]))
    if n < 4:
        return _star(taxa)
    Q = _dense_cover(n, cover.quads, cover.chosen)
    score = Q.sum(axis=(2, 3)) // 2  # pairs {c, d} with ab|cd
    active = list(range(n))
    node = list(range(n))  # current subtree vertex for each active taxon
    parent = [-1] * n
    while len(active) > 3:
        idx = np.array(active)
        sub = score[np.ix_(idx, idx)].astype(np.int64)
        np.fill_diagonal(sub, -1)
        flat = int(np.argmax(sub))
        i, j = divmod(flat, len(idx))
        a, b = int(idx[min(i, j)]), int(idx[max(i, j)])
        u = len(parent)
        parent.append(-1)
        parent[node[a]] = u
        parent[node[b]] = u
        node[a] = u
        active.remove(b)
        rest = np.array(active)
        score -= Q[:, :, b, :][:, :, rest].sum(axis=-1)
    centre = len(parent)
    parent.append(-1)
    for a in active:
        parent[node[a]] = centre
    labels = list(taxa) + [""] * (len(parent) - n)
    result = Tree(parent, [0.0 if p < 0 else 1.0 for p in parent], labels, rooted=False)
    check = quad_splits(_topology_metric(result, taxa), cover.quads)
    bad = np.flatnonzero(check != cover.chosen)
    if len(bad):
        row = int(bad[0])
        X = tuple(taxa[i] for i in cover.quads[row])
        raise IncompatibleCoverError(
            Quartet(X, int(cover.chosen[row])), Quartet(X, int(check[row])), result)
    return result


def _star(taxa) -> Tree:
    n = len(taxa)
    if n == 0:
        raise InputError("cannot build a tree on no taxa")
    if n == 1:
        return Tree([-1], [0.0], list(taxa), rooted=False)
    return Tree([n] * n + [-1], [1.0] * n + [0.0], list(taxa) + [""], rooted=False)


def quartet_plurality(genes: Sequence[Tree], taxa=None, strict: bool = True) -> Tree:
    """Species topology from the plurality quartet of every four-tuple."""
    table = quartet_frequencies(genes, taxa)
    return tree_from_cover(plurality_cover(table, strict=strict))
