"""Computational core: random streams, laws, solvers and the rumor constructions."""
