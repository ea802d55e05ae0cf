"""witnesskit: budgeted witnessing games and the reductions built on them."""

__version__ = "0.1.0"
