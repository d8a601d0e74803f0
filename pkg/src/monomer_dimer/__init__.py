"""Monomer-dimer models: exact partition functions, Gaussian representation,
matching-polynomial zeros, mean-field phase diagram, finite-N fluctuations
and quenched solvers."""

__version__ = "0.1.0"
