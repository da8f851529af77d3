"""Fully distributed multitask actor-critic training over agent networks.

Agents each own one task and one set of value/policy parameters; every round
they take a local gradient step and then average parameters with their graph
neighbours through a doubly stochastic mixing matrix.  The package also ships
the exact finite-state primal-dual foundation of the method, the classic
control environments used by the experiment harness, and the harness itself.
"""

__version__ = "0.1.0"
