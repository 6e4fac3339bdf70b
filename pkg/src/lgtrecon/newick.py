"""Newick reading and writing.

Branch lengths are required on every non-root edge.  Extinct leaves of a
species phylogeny carry the suffix ``!x`` on their label.  LGT rates live in
a sidecar CSV (``edge,lambda`` keyed by child vertex id), since Newick has no
slot for them.
"""

from __future__ import annotations

import csv
import re

from .errors import NewickError
from .tree import GeneTree, SpeciesPhylogeny, Tree

EXTINCT_SUFFIX = "!x"

_TOKEN = re.compile(r"\s*([(),:;]|[^(),:;\s]+)")


def _tokens(text):
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            break
        yield m.group(1)
        pos = m.end()


def _parse_arrays(text):
    parent, length, labels = [], [], []
    stack = []
    cur = None
    after_close = False
    expect_length = False
    finished = False
    for tok in _tokens(text):
        if finished:
            raise NewickError(f"trailing text after ';': {tok!r}")
        closing, after_close = after_close, False
        if tok == "(":
            v = len(parent)
            parent.append(stack[-1] if stack else -1)
            length.append(None)
            labels.append("")
            if not stack and v != 0:
                raise NewickError("more than one top-level group")
            stack.append(v)
            cur = None
        elif tok == ",":
            if not stack:
                raise NewickError("',' outside parentheses")
            cur = None
        elif tok == ")":
            if not stack:
                raise NewickError("unbalanced ')'")
            cur = stack.pop()
            after_close = True
            continue
        elif tok == ":":
            if cur is None:
                raise NewickError("':' with nothing to attach to")
            expect_length = True
        elif tok == ";":
            if stack:
                raise NewickError("unbalanced '('")
            finished = True
        elif expect_length:
            try:
                length[cur] = float(tok)
            except ValueError:
                raise NewickError(f"bad branch length {tok!r}") from None
            expect_length = False
            cur = None
        elif closing:
            labels[cur] = tok  # internal node label, discarded later
        else:
            v = len(parent)
            if not stack and v != 0:
                raise NewickError("more than one top-level group")
            parent.append(stack[-1] if stack else -1)
            length.append(None)
            labels.append(tok)
            cur = v
    if not finished:
        raise NewickError("missing terminating ';'")
    if not parent:
        raise NewickError("empty tree")
    return parent, length, labels


def parse_newick(text: str, kind: str = "species"):
    """Parse one Newick string.

    ``kind`` is ``"species"`` (SpeciesPhylogeny, extinct suffix honoured),
    ``"gene"`` (GeneTree) or ``"tree"`` (plain rooted Tree).
    """
    parent, length, labels = _parse_arrays(text)
    root = 0
    for v, p in enumerate(parent):
        if v == root:
            length[v] = 0.0
            continue
        if length[v] is None:
            raise NewickError(f"missing branch length above {labels[v] or f'vertex {v}'}")
        if not length[v] > 0:
            raise NewickError(f"nonpositive branch length {length[v]}")
    has_child = set(parent)
    extinct = []
    for v, name in enumerate(labels):
        if v in has_child:
            labels[v] = ""  # internal labels are not kept
        elif name.endswith(EXTINCT_SUFFIX):
            labels[v] = name[: -len(EXTINCT_SUFFIX)]
            extinct.append(labels[v])
    leaf_names = [labels[v] for v in range(len(labels)) if v not in has_child]
    if len(set(leaf_names)) != len(leaf_names):
        raise NewickError("duplicate leaf labels")
    try:
        if kind == "species":
            return SpeciesPhylogeny(parent, length, labels, extinct=extinct)
        if extinct:
            raise NewickError("extinct flags are only meaningful on species trees")
        if kind == "gene":
            return GeneTree(parent, length, labels)
        if kind == "tree":
            return Tree(parent, length, labels)
    except NewickError:
        raise
    except ValueError as exc:
        raise NewickError(str(exc)) from exc
    raise NewickError(f"unknown tree kind {kind!r}")


def emit_newick(tree: Tree, lengths: bool = True) -> str:
    if len(tree) == 0:
        return ";"
    extinct = getattr(tree, "extinct", frozenset())
    out = {}
    for v in tree.postorder:
        kids = tree.children[v]
        if kids:
            s = "(" + ",".join(out.pop(c) for c in kids) + ")"
        else:
            s = tree.labels[v] + (EXTINCT_SUFFIX if tree.labels[v] in extinct else "")
        if lengths and v != tree.root:
            s += ":" + repr(tree.length[v])
        out[v] = s
    return out[tree.root] + ";"


def read_trees(path, kind: str = "gene") -> list:
    """Read one tree per non-blank line; a bare ';' line is an empty gene tree."""
    trees = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line == ";" and kind == "gene":
                trees.append(GeneTree.empty())
            else:
                trees.append(parse_newick(line, kind=kind))
    return trees


def write_trees(path, trees) -> None:
    with open(path, "w") as fh:
        for t in trees:
            fh.write(emit_newick(t) + "\n")


def write_rates(path, tree: SpeciesPhylogeny) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["edge", "lambda"])
        for e in tree.edges:
            w.writerow([e, repr(tree.lam[e])])


def read_rates(path, tree: SpeciesPhylogeny) -> SpeciesPhylogeny:
    lam = list(tree.lam)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            e = int(row["edge"])
            if e == tree.root or not 0 <= e < len(tree):
                raise NewickError(f"rate table names unknown edge {e}")
            lam[e] = float(row["lambda"])
    return tree.with_rates(lam)
