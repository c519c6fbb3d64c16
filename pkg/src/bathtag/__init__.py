"""Deciding whether a thermal bath is bosonic or fermionic with a monitored qubit probe.

Subpackages
-----------
qcore    exact small-dimension complex linear algebra and superoperator helpers
lindblad unconditional dynamics, hypothesis generators, steady-state analytics
monitor  stochastic trajectories under photodetection / homodyne monitoring
tagging  discrimination figures of merit and a brute-force enumeration oracle
cli      batch experiment runner (``bathtag steady|curves|validate``)
"""

__version__ = "0.1.0"

from . import qcore, lindblad, monitor, tagging  # noqa: F401
