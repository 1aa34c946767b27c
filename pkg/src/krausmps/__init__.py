"""MPS trajectory and MPDO simulator for noisy brickwork quantum circuits.

Unravels single-qubit Kraus channels into stochastic matrix-product-state
trajectories under interchangeable representation strategies (naive, fixed
rotation, adaptive non-unitarity maximization, greedy entanglement
optimization), runs the deterministic matrix-product-density-operator
analog, and emits effective-Schmidt-rank and entanglement diagnostics.
"""

__version__ = "0.1.0"
