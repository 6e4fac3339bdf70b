"""Median distance aggregation and neighbor-joining tree building."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError, UnsupportedPairError
from .tree import DistanceMatrix, Tree, leaf_path_matrix


@dataclass(frozen=True)
class MedianDistance:
    matrix: DistanceMatrix
    support: np.ndarray  # number of genes defining each pair


def _as_values(gene, taxa) -> np.ndarray:
    if isinstance(gene, DistanceMatrix):
        out = np.full((len(taxa), len(taxa)), np.nan)
        index = {x: i for i, x in enumerate(taxa)}
        extra = set(gene.taxa) - set(index)
        if extra:
            raise InputError(f"matrix taxa outside the working set: {sorted(extra)}")
        pos = [index[x] for x in gene.taxa]
        out[np.ix_(pos, pos)] = gene.values
        return out
    extra = gene.taxa - set(taxa)
    if extra:
        raise InputError(f"gene taxa outside the working set: {sorted(extra)}")
    return leaf_path_matrix(gene, taxa)


def median_matrix(genes: Sequence, taxa=None) -> MedianDistance:
    """Per-pair median over the genes that define the pair.

    Genes are gene trees (path lengths) or distance matrices whose NaN
    entries mark undefined pairs.  With an even number of values the lower
    middle one is taken, so the result is always a value some gene produced.
    """
    genes = list(genes)
    if taxa is None:
        names = set()
        for g in genes:
            names |= set(g.taxa)
        taxa = names
    taxa = tuple(sorted(taxa))
    n = len(taxa)
    if not genes:
        raise InputError("need at least one gene")
    stack = np.stack([_as_values(g, taxa) for g in genes])
    support = (~np.isnan(stack)).sum(axis=0)
    off = ~np.eye(n, dtype=bool)
    missing = np.argwhere((support == 0) & off)
    if len(missing):
        i, j = missing[0]
        raise UnsupportedPairError(taxa[i], taxa[j])
    ordered = np.sort(stack, axis=0)  # NaN sorts last
    k = np.maximum(support - 1, 0) // 2
    med = np.take_along_axis(ordered, k[None], axis=0)[0]
    np.fill_diagonal(med, 0.0)
    return MedianDistance(DistanceMatrix(taxa, med), support)


def neighbor_joining(D: DistanceMatrix) -> Tree:
    """Unrooted binary topology by neighbor joining.

    Ties in the join criterion go to the first pair in row-major order.
    Branch lengths are the usual NJ estimates and may be negative.
    """
    taxa = D.taxa
    n = len(taxa)
    M = np.array(D.values, dtype=float)
    if not np.all(np.isfinite(M)):
        raise InputError("neighbor joining needs finite distances")
    if n == 0:
        raise InputError("cannot build a tree on no taxa")
    if n == 1:
        return Tree([-1], [0.0], list(taxa), rooted=False)
    if n == 2:
        return Tree([2, 2, -1], [M[0, 1] / 2, M[0, 1] / 2, 0.0], list(taxa) + [""], rooted=False)
    parent = [-1] * n
    length = [0.0] * n
    node = list(range(n))
    active = list(range(n))
    while len(active) > 3:
        idx = np.array(active)
        sub = M[np.ix_(idx, idx)]
        m = len(idx)
        r = sub.sum(axis=1)
        crit = (m - 2) * sub - r[:, None] - r[None, :]
        crit[np.tril_indices(m)] = np.inf
        i, j = np.unravel_index(int(np.argmin(crit)), crit.shape)
        a, b = int(idx[i]), int(idx[j])
        dab = M[a, b]
        la = dab / 2 + (r[i] - r[j]) / (2 * (m - 2))
        u = len(parent)
        parent.append(-1)
        length.append(0.0)
        parent[node[a]], length[node[a]] = u, la
        parent[node[b]], length[node[b]] = u, dab - la
        # the joined pair now lives in row a
        new = (M[a] + M[b] - dab) / 2
        M[a, :] = new
        M[:, a] = new
        M[a, a] = 0.0
        node[a] = u
        active.remove(b)
    a, b, c = active
    centre = len(parent)
    parent.append(-1)
    length.append(0.0)
    for x, y, z in ((a, b, c), (b, a, c), (c, a, b)):
        parent[node[x]] = centre
        length[node[x]] = (M[x, y] + M[x, z] - M[y, z]) / 2
    labels = list(taxa) + [""] * (len(parent) - n)
    return Tree(parent, length, labels, rooted=False)


build_distance_tree = neighbor_joining


def median_tree(genes: Sequence, taxa=None) -> Tree:
    return neighbor_joining(median_matrix(genes, taxa).matrix)
