"""GTR sequence evolution on gene trees and log-det distances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, ModelViolationError, SaturationError
from .rng import derive_rng
from .tree import DistanceMatrix, Tree

ALPHABET = "ACGT"
# exchangeability order: AC, AG, AT, CG, CT, GT
_UPPER = np.triu_indices(4, 1)


class GtrModel:
    """Reversible 4-state substitution model scaled to one substitution per unit time."""

    def __init__(self, pi=(0.25, 0.25, 0.25, 0.25), rates=(1, 1, 1, 1, 1, 1),
                 rate_bounds=None):
        pi = np.asarray(pi, dtype=float)
        rates = np.asarray(rates, dtype=float)
        if pi.shape != (4,) or np.any(pi <= 0) or abs(pi.sum() - 1) > 1e-9:
            raise InputError("pi must be four positive numbers summing to 1")
        if rates.shape != (6,) or np.any(rates <= 0):
            raise InputError("rates must be six positive exchangeabilities")
        if rate_bounds is not None:
            lo, hi = rate_bounds
            if np.any(rates < lo) or np.any(rates > hi):
                raise InputError(f"exchangeabilities outside [{lo}, {hi}]")
        self.pi = pi / pi.sum()
        self.rates = rates
        S = np.zeros((4, 4))
        S[_UPPER] = rates
        S = S + S.T
        Q = S * self.pi[None, :]
        np.fill_diagonal(Q, -Q.sum(axis=1))
        Q /= -np.dot(self.pi, np.diag(Q))
        self.Q = Q
        # Q is similar to a symmetric matrix through diag(sqrt(pi))
        s = np.sqrt(self.pi)
        A = s[:, None] * Q / s[None, :]
        w, V = np.linalg.eigh((A + A.T) / 2)
        if not np.all(np.isfinite(w)):
            raise ModelViolationError("rate matrix eigendecomposition failed")
        self._eig = w
        self._left = V / s[:, None]
        self._right = V.T * s[None, :]

    @classmethod
    def jukes_cantor(cls) -> "GtrModel":
        return cls()

    def P(self, t: float) -> np.ndarray:
        """Transition matrix exp(tQ)."""
        if t < 0:
            raise InputError("branch length must be nonnegative")
        if t == 0:
            return np.eye(4)
        P = (self._left * np.exp(self._eig * t)) @ self._right
        P = np.clip(P, 0.0, None)
        return P / P.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class Alignment:
    taxa: tuple
    states: np.ndarray  # (taxa, sites) integer codes 0..3
    gene_id: int = 0

    def __post_init__(self):
        if self.states.ndim != 2 or self.states.shape[0] != len(self.taxa):
            raise InputError("one row of states per taxon expected")

    @property
    def k(self) -> int:
        return self.states.shape[1]

    def row(self, taxon) -> np.ndarray:
        return self.states[self.taxa.index(taxon)]

    def sequences(self) -> dict:
        letters = np.array(list(ALPHABET))
        return {x: "".join(letters[r]) for x, r in zip(self.taxa, self.states)}


def evolve_along(states: np.ndarray, t: float, model: GtrModel, rng) -> np.ndarray:
    """Child states after time ``t`` along one edge."""
    cp = np.cumsum(model.P(t), axis=1)
    u = rng.random(len(states))
    return np.minimum((u[:, None] > cp[states]).sum(axis=1), 3)


def evolve_sequences(gene: Tree, model: GtrModel, k: int, rng=None, gene_id: int = 0) -> Alignment:
    """i.i.d. sites: root drawn from pi, then each edge via exp(length Q)."""
    if k < 1:
        raise InputError("sequence length must be at least 1")
    rng = derive_rng(0) if rng is None else derive_rng(rng)
    states = {}
    root = gene.root
    states[root] = rng.choice(4, size=k, p=model.pi)
    for v in gene.preorder:
        if v == root:
            continue
        states[v] = evolve_along(states[gene.parent[v]], gene.length[v], model, rng)
    taxa = tuple(sorted(gene.taxa))
    rows = np.stack([states[gene.leaf_vertex[x]] for x in taxa]).astype(np.int8)
    return Alignment(taxa, rows, gene_id)


def _joint(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.bincount(4 * a.astype(np.int64) + b, minlength=16).reshape(4, 4) / len(a)


def logdet_distance(alignment: Alignment, a, b) -> float:
    """Paralinear distance between two rows.

    -1/4 [log det F - 1/2 log(prod f_a prod f_b)], with F the joint site
    frequency matrix and f_a, f_b its marginals.  Under Jukes-Cantor this
    targets the path length in expected substitutions.
    """
    F = _joint(alignment.row(a), alignment.row(b))
    fa, fb = F.sum(axis=1), F.sum(axis=0)
    if np.any(fa == 0) or np.any(fb == 0):
        raise SaturationError(f"a state is absent from {a} or {b}")
    sign, logdet = np.linalg.slogdet(F)
    if sign <= 0:
        raise SaturationError(f"joint frequency determinant for ({a}, {b}) is not positive")
    return float(-0.25 * (logdet - 0.5 * (np.log(fa).sum() + np.log(fb).sum())))


def logdet_matrix(alignment: Alignment):
    """All pairwise log-det distances; saturated pairs are NaN.

    Returns the matrix and the number of saturated pairs.
    """
    n = len(alignment.taxa)
    D = np.zeros((n, n))
    saturated = 0
    for i in range(n):
        for j in range(i + 1, n):
            try:
                D[i, j] = D[j, i] = logdet_distance(alignment, alignment.taxa[i], alignment.taxa[j])
            except SaturationError:
                D[i, j] = D[j, i] = np.nan
                saturated += 1
    # log-det can dip slightly below zero for near-identical rows
    D = np.where(np.isnan(D), D, np.maximum(D, 0.0))
    return DistanceMatrix(alignment.taxa, D), saturated


def write_phylip(path, alignment: Alignment) -> None:
    seqs = alignment.sequences()
    with open(path, "w") as fh:
        fh.write(f"{len(alignment.taxa)} {alignment.k}\n")
        for x in alignment.taxa:
            fh.write(f"{x} {seqs[x]}\n")


def read_phylip(path, gene_id: int = 0) -> Alignment:
    """Relaxed PHYLIP: a count line, then 'name sequence' per line."""
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    try:
        n, k = int(lines[0][0]), int(lines[0][1])
    except (IndexError, ValueError):
        raise InputError("PHYLIP header must give taxon count and length") from None
    body = lines[1:]
    if len(body) != n:
        raise InputError(f"expected {n} sequences, found {len(body)}")
    lookup = {c: i for i, c in enumerate(ALPHABET)}
    taxa, rows = [], []
    for parts in body:
        name, seq = parts[0], "".join(parts[1:]).upper()
        if len(seq) != k:
            raise InputError(f"sequence {name} has length {len(seq)}, expected {k}")
        try:
            rows.append([lookup[c] for c in seq])
        except KeyError as exc:
            raise InputError(f"unknown character {exc.args[0]!r} in {name}") from None
        taxa.append(name)
    return Alignment(tuple(taxa), np.array(rows, dtype=np.int8), gene_id)
