"""Calcular algebras on finite data.

Agler-type norms computed by a small semidefinite solver, network
realizations of the resulting certificates, a functional calculus for
commuting matrix tuples, and independent numerical oracles.
"""

__version__ = "0.1.0"
