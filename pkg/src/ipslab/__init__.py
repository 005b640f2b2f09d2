"""Simulation and verification lab for contact, branching-coalescing and Wright-Fisher renormalization models.

Subpackages: ``lattice`` and ``oracle`` (windows, kernels, exact small-chain
laws), ``contact``, ``braco_resem``, ``wf_renorm``, ``pde`` and the ``io`` /
``experiments`` / ``cli`` runner.
"""

__version__ = "0.1.0"
