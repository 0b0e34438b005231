"""Periodic Jacobi operators with Wigner-von Neumann perturbations."""
