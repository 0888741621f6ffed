from .base import Environment, InvalidAction
from .hypergrid import HyperGrid, hypergrid_objectives, hypergrid_step, objective_table
from .mutation import MutationSet, mutation_apply
from .ngrams import AMINO_ACIDS, TASKS, NGrams, ngram_counts, ngram_objectives

__all__ = [
    "AMINO_ACIDS", "Environment", "HyperGrid", "InvalidAction", "MutationSet", "NGrams", "TASKS",
    "hypergrid_objectives", "hypergrid_step", "mutation_apply", "ngram_counts",
    "ngram_objectives", "objective_table",
]
