"""Random spanning trees in a random environment on the complete graph.

Edge weights are exp(-beta * omega_e) with omega_e i.i.d. uniform; the tree
law is proportional to the product of its edge weights. Modules:

- graph_env: environments, log-weight views, edge ids, union-find
- oracle: partition function, effective resistance, inclusion probabilities
- samplers: Wilson, the exact sequential sampler, Kruskal, enumeration
- er_coupling: p-clusters of the environment and their statistics
- walk_stats: stationary law, spectrum, mixing, walks to the giant
- experiments: sweeps, seeds, CSV, exponent fits, reports
- checks: the verification suite behind ``rstre verify``
"""

__version__ = "0.1.0"
