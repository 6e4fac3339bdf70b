"""Species phylogeny generators and LGT weight summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import GenerationError, InputError
from .rng import derive_rng
from .tree import SpeciesPhylogeny, extant_phylogeny, restrict

EXACT_UPSILON_LIMIT = 64
MAX_RETRIES = 1000


@dataclass(frozen=True)
class YuleParams:
    n: int
    nu: float = 1.0
    lambda_bar: float = 0.0
    rho_lambda: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise InputError("Yule trees need n >= 2")
        if not self.nu > 0:
            raise InputError("birth rate must be positive")
        _check_rate_band(self.lambda_bar, self.rho_lambda)


@dataclass(frozen=True)
class BoundedRatesParams:
    n_plus: int
    tau_bar: float = 1.0
    rho_tau: float = 0.5
    lambda_bar: float = 0.0
    rho_lambda: float = 1.0
    shape: str = "randomUltrametric"
    seed: int = 0

    def __post_init__(self):
        if self.n_plus < 2:
            raise InputError("need at least two extant leaves")
        if not self.tau_bar > 0:
            raise InputError("tau_bar must be positive")
        if not 0 < self.rho_tau <= 1:
            raise InputError("rho_tau must lie in (0, 1]")
        _check_rate_band(self.lambda_bar, self.rho_lambda)
        if self.shape not in ("completeBinary", "randomUltrametric"):
            raise InputError(f"unknown shape {self.shape!r}")
        if self.shape == "completeBinary" and self.n_plus & (self.n_plus - 1):
            raise InputError("completeBinary needs n_plus to be a power of two")


def _check_rate_band(lambda_bar, rho_lambda):
    # lambda_bar = 0 is accepted: it expresses an LGT-free control run
    if not (lambda_bar >= 0 and math.isfinite(lambda_bar)):
        raise InputError("lambda_bar must be finite and nonnegative")
    if not 0 < rho_lambda <= 1:
        raise InputError("rho_lambda must lie in (0, 1]")


def _draw_rates(rng, n_vertices, root, lambda_bar, rho_lambda):
    lam = rng.uniform(rho_lambda * lambda_bar, lambda_bar, size=n_vertices)
    lam[root] = 0.0
    return lam


def _label_leaves(parent):
    """Name leaves "1".."n" in preorder."""
    n = len(parent)
    kids = [[] for _ in range(n)]
    for v, p in enumerate(parent):
        if p >= 0:
            kids[p].append(v)
    labels = [""] * n
    stack, k = [parent.index(-1)], 0
    while stack:
        v = stack.pop()
        if not kids[v]:
            k += 1
            labels[v] = str(k)
        stack.extend(reversed(kids[v]))
    return labels


def generate_yule(params: YuleParams) -> SpeciesPhylogeny:
    """Pure-birth tree with ``n`` contemporaneous leaves.

    Starts from the two root lineages; while k lineages are alive the next
    split comes after an Exp(k nu) wait.  The run stops at the split that
    would create lineage n+1 and every pendant edge is cut at that instant,
    so the height is a sum of Exp(k nu) waits for k = 2..n.
    """
    rng = derive_rng(params.seed)
    parent, birth = [-1, 0, 0], [0.0, 0.0, 0.0]
    alive = [1, 2]
    t = 0.0
    while True:
        k = len(alive)
        t += rng.exponential(1.0 / (k * params.nu))
        if k == params.n:
            break
        i = int(rng.integers(k))
        v = alive[i]
        birth[v] = t  # time of the split at the bottom of edge v
        c1, c2 = len(parent), len(parent) + 1
        parent += [v, v]
        birth += [0.0, 0.0]
        alive[i:i + 1] = [c1, c2]
    # birth[v] holds the time of vertex v (its lower end); leaves sit at t
    for v in alive:
        birth[v] = t
    length = [0.0] + [birth[v] - birth[parent[v]] for v in range(1, len(parent))]
    lam = _draw_rates(rng, len(parent), 0, params.lambda_bar, params.rho_lambda)
    return SpeciesPhylogeny(parent, length, _label_leaves(parent), lam=lam)


def _complete_binary(n_plus):
    parent = [-1]
    frontier = [0]
    while len(frontier) < n_plus:
        nxt = []
        for v in frontier:
            nxt += [len(parent), len(parent) + 1]
            parent += [v, v]
        frontier = nxt
    return parent


def _random_topology(rng, n):
    """Recursive split with the left part uniform in [ceil(n/3), floor(2n/3)]."""
    parent, sizes = [-1], [n]
    stack = [0]
    while stack:
        v = stack.pop()
        m = sizes[v]
        if m == 1:
            continue
        lo, hi = max(1, -(-m // 3)), max(1, (2 * m) // 3)
        left = int(rng.integers(lo, hi + 1))
        for s in (left, m - left):
            parent.append(v)
            sizes.append(s)
            stack.append(len(parent) - 1)
    return parent


def _leaf_depth_range(parent):
    """Fewest and most edges from every vertex down to a leaf below it."""
    n = len(parent)
    dmin = [math.inf] * n
    dmax = [-1] * n
    for v in range(n - 1, -1, -1):  # children always have larger ids
        if dmax[v] < 0:
            dmin[v], dmax[v] = 0, 0
        p = parent[v]
        if p >= 0:
            dmin[p] = min(dmin[p], dmin[v] + 1)
            dmax[p] = max(dmax[p], dmax[v] + 1)
    return dmin, dmax


def generate_bounded_rates(params: BoundedRatesParams) -> SpeciesPhylogeny:
    """Ultrametric tree whose edge times all lie in [rho_tau tau_bar, tau_bar].

    ``completeBinary`` gives every edge length tau_bar and every edge rate
    lambda_bar.  ``randomUltrametric`` draws a random topology, a horizon H
    and then vertex times top-down, each uniform over the interval that
    keeps the edge above it and every path below it within the bounds.
    Topologies whose depth spread makes that impossible are redrawn.
    """
    rng = derive_rng(params.seed)
    lo, hi = params.rho_tau * params.tau_bar, params.tau_bar
    if params.shape == "completeBinary":
        parent = _complete_binary(params.n_plus)
        length = [0.0] + [params.tau_bar] * (len(parent) - 1)
        lam = [0.0] + [params.lambda_bar] * (len(parent) - 1)
        return SpeciesPhylogeny(parent, length, _label_leaves(parent), lam=lam)
    for _ in range(MAX_RETRIES):
        parent = _random_topology(rng, params.n_plus)
        dmin, dmax = _leaf_depth_range(parent)
        if any(lo * dmax[v] > hi * dmin[v] for v in range(len(parent))):
            continue
        H = rng.uniform(lo * dmax[0], hi * dmin[0])
        time = [0.0] * len(parent)
        for v in range(1, len(parent)):  # parents precede children
            tp = time[parent[v]]
            a = max(tp + lo, H - hi * dmin[v])
            b = min(tp + hi, H - lo * dmax[v])
            time[v] = H if dmax[v] == 0 else rng.uniform(a, b)
        length = [0.0] + [time[v] - time[parent[v]] for v in range(1, len(parent))]
        lam = _draw_rates(rng, len(parent), 0, params.lambda_bar, params.rho_lambda)
        return SpeciesPhylogeny(parent, length, _label_leaves(parent), lam=lam)
    raise GenerationError(f"no feasible ultrametric tree after {MAX_RETRIES} attempts")


# ---------------------------------------------------------------------------
# LGT weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LgtWeights:
    edge: np.ndarray       # lambda(e) tau(e) per vertex id (0 at the root)
    total: float           # over every edge of the phylogeny
    extant: float          # over the edges of the extant phylogeny
    upsilon4: float        # heaviest four-taxon subtree
    upsilon4_exact: bool   # False when upsilon4 is only an upper bound
    upsilon2: float        # heaviest leaf-pair path


def weight_metric(tree: SpeciesPhylogeny, taxa=None):
    """LGT weight of the path between every pair of extant taxa."""
    ext = extant_phylogeny(tree)
    taxa = sorted(ext.taxa) if taxa is None else list(taxa)
    w = np.asarray(ext.edge_weight)
    W = np.zeros(len(ext))
    for v in ext.preorder:
        p = ext.parent[v]
        if p >= 0:
            W[v] = W[p] + w[v]
    vs = [ext.leaf_vertex[x] for x in taxa]
    D = np.empty((len(vs), len(vs)))
    for i, a in enumerate(vs):
        for j, b in enumerate(vs):
            D[i, j] = W[a] + W[b] - 2 * W[ext.lca(a, b)]
    return taxa, D, float(W[vs].max()) if vs else 0.0


def subtree_weight(tree: SpeciesPhylogeny, X) -> float:
    """LGT weight of the subtree spanned by the taxa in ``X``."""
    sub = restrict(tree, X, suppress=True)
    return float(np.sum(sub.edge_weight))


def quartet_weights(D: np.ndarray, quads: np.ndarray) -> np.ndarray:
    """Subtree weight of each four-tuple from the pairwise path weights.

    The minimum pairing sum counts the four pendant paths, the maximum adds
    the internal path twice, so their mean is the subtree weight.
    """
    a, b, c, d = quads.T
    s = np.stack([D[a, b] + D[c, d], D[a, c] + D[b, d], D[a, d] + D[b, c]])
    return (s.min(axis=0) + s.max(axis=0)) / 2


def lgt_weights(tree: SpeciesPhylogeny) -> LgtWeights:
    w = np.asarray(tree.edge_weight)
    ext = extant_phylogeny(tree)
    taxa, D, deepest = weight_metric(tree)
    n = len(taxa)
    if n >= 4 and n <= EXACT_UPSILON_LIMIT:
        quads = np.array(list(combinations(range(n), 4)), dtype=np.int64)
        ups4, exact = float(quartet_weights(D, quads).max()), True
    elif n >= 4:
        ups4, exact = 4.0 * deepest, False
    else:
        ups4, exact = float(np.sum(ext.edge_weight)), True
    return LgtWeights(
        edge=w,
        total=float(w.sum()),
        extant=float(np.sum(ext.edge_weight)),
        upsilon4=ups4,
        upsilon4_exact=exact,
        upsilon2=float(D.max()) if n else 0.0,
    )
