"""relprop: modified-backpropagation attribution with convergence audits.

A compact neural-network engine (dense/conv/pool/residual), a backward
relevance-propagation engine covering the common modified-BP attribution
rules, and the audit instruments that expose when those rules collapse to a
rank-1 backward map: cosine-similarity convergence, cascading-randomization
sanity checks, the random-logit test, and direct matrix-chain simulations.
"""

__version__ = "0.1.0"

from . import attribution, backend, chainlab, fgrid, metrics, model, numerics, rng  # noqa: F401
