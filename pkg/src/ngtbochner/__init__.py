"""Numerical tensor calculus for non-symmetric geometry with Einstein connections."""
