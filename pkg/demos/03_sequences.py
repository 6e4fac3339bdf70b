"""Median-tree reconstruction from simulated alignments via log-det distances."""
from lgtrecon.distance import median_matrix, neighbor_joining
from lgtrecon.lgt import LgtParams, generate_gene_trees
from lgtrecon.rng import derive_rng
from lgtrecon.sequences import GtrModel, evolve_sequences, logdet_matrix
from lgtrecon.species import YuleParams, generate_yule
from lgtrecon.tree import rf_distance

sp = generate_yule(YuleParams(12, lambda_bar=0.05, seed=4))
# substitution rate 0.1 per unit of species time
genes = generate_gene_trees(sp, LgtParams(seed=4), 30, rates=[0.1] * len(sp))
model = GtrModel.jukes_cantor()
for k in (200, 2000, 20000):
    mats = [logdet_matrix(evolve_sequences(g, model, k, derive_rng(4, k, i)))[0]
            for i, g in enumerate(genes)]
    est = neighbor_joining(median_matrix(mats).matrix)
    print(f"k={k:>6}: RF distance to species tree {rf_distance(est, sp)}")
