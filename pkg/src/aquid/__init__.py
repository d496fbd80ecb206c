"""aquid: numerical laboratory for a rotating dc atomtronic SQUID.

Pipeline: 2D rotating-frame mean-field solver (gp2d) -> generalized
Bose-Hubbard parameter extraction (gbh) -> semiclassical two-mode dynamics
and critical curves (tmdyn) -> quantized phase Hamiltonian and qubit metrics
(qspec).  Shared constants and scenario handling live in units.
"""

__version__ = "0.1.0"
