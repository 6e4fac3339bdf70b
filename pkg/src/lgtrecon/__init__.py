"""Species-tree and highway reconstruction under lateral gene transfer."""

from .distance import median_matrix, median_tree, neighbor_joining
from .errors import (ConfigError, InputError, LgtError, ModelViolationError,
                     ReconstructionAbort)
from .highways import road_roller
from .lgt import Highway, LgtEvent, LgtParams, apply_events, generate_gene_trees, sample_events
from .newick import parse_newick, read_trees, write_trees
from .quartets import quartet_frequencies, quartet_plurality, tree_from_cover
from .species import (BoundedRatesParams, YuleParams, generate_bounded_rates, generate_yule,
                      lgt_weights)
from .tree import DistanceMatrix, GeneTree, SpeciesPhylogeny, Tree, rf_distance

__version__ = "0.1.0"

__all__ = [
    "BoundedRatesParams", "ConfigError", "DistanceMatrix", "GeneTree", "Highway", "InputError",
    "LgtError", "LgtEvent", "LgtParams", "ModelViolationError", "ReconstructionAbort",
    "SpeciesPhylogeny", "Tree", "YuleParams", "apply_events", "generate_bounded_rates",
    "generate_gene_trees", "generate_yule", "lgt_weights", "median_matrix", "median_tree",
    "neighbor_joining", "parse_newick", "quartet_frequencies", "quartet_plurality",
    "read_trees", "rf_distance", "road_roller", "sample_events", "tree_from_cover",
    "write_trees",
]
