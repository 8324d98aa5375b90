"""Analytic error model, fidelities and the Monte Carlo harness."""
