"""Continuous dispersive measurement of a qubit: trajectories, likelihood filters and Fisher information."""
