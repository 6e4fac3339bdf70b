import pytest
from hypothesis import given, settings, strategies as st

from lgtrecon.errors import InputError, NewickError
from lgtrecon.newick import (emit_newick, parse_newick, read_rates, read_trees, write_rates,
                             write_trees)
from lgtrecon.species import YuleParams, generate_yule
from lgtrecon.tree import GeneTree, same_tree


def test_parse_simple():
    t = parse_newick("((a:1,b:1):0.5,c:1.5);")
    assert t.taxa == {"a", "b", "c"}
    assert t.times[t.leaf_vertex["c"]] == pytest.approx(1.5)


def test_internal_labels_and_whitespace_are_tolerated():
    t = parse_newick(" ( (a:1 , b:1)ab:0.5 , c:1.5 )root ; ")
    assert t.taxa == {"a", "b", "c"}
    assert "ab" not in t.labels


@pytest.mark.parametrize("text", [
    "((a:1,b:1):1,c:2",       # unbalanced
    "((a:1,b:1),c:2);",       # missing length
    "((a:1,b:0):1,c:1);",     # zero length
    "((a:1,a:1):1,c:2);",     # duplicate label
    "((a:1,b:1):1,c:2);x",    # trailing text
    "(a:1,b:1):1,(c:1):1;",   # two top-level groups
])
def test_malformed_input(text):
    with pytest.raises(NewickError):
        parse_newick(text, kind="tree")


def test_newick_error_is_an_input_error():
    assert issubclass(NewickError, InputError)


def test_extinct_round_trip():
    text = "((a:2.0,x!x:1.0):1.0,b:3.0);"
    sp = parse_newick(text)
    assert sp.extinct == {"x"}
    assert emit_newick(sp) == text


def test_gene_trees_reject_extinct_flags():
    with pytest.raises(NewickError):
        parse_newick("((a:1,x!x:1):1,b:2);", kind="gene")


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 20), st.integers(0, 10_000))
def test_round_trip_yule(n, seed):
    sp = generate_yule(YuleParams(n, seed=seed))
    back = parse_newick(emit_newick(sp))
    assert same_tree(sp, back, atol=1e-12)


def test_multi_tree_file_with_empty_gene(tmp_path):
    g = parse_newick("((a:1,b:1):1,(c:1,d:1):1);", kind="gene")
    path = tmp_path / "genes.nwk"
    write_trees(path, [g, GeneTree.empty(), g])
    back = read_trees(path)
    assert len(back) == 3
    assert back[1].is_empty
    assert same_tree(back[0], g)


def test_rates_sidecar(tmp_path):
    sp = generate_yule(YuleParams(6, lambda_bar=2.0, rho_lambda=0.5, seed=4))
    write_rates(tmp_path / "r.csv", sp)
    plain = parse_newick(emit_newick(sp))
    back = read_rates(tmp_path / "r.csv", plain)
    assert back.lam == sp.lam
    (tmp_path / "bad.csv").write_text("edge,lambda\n99,1.0\n")
    with pytest.raises(NewickError):
        read_rates(tmp_path / "bad.csv", plain)
