"""Exact-arithmetic workbench for flow-time scheduling and prefix discrepancy.

Subpackages:

- ``core``: scheduling instances, FIFO / SRPT evaluation, generators
- ``lp``: exact rational simplex
- ``coloring``: discrepancy measures and sign-finding algorithms
- ``maxflow``: assignment LP pipeline (bound search, dyadic rounding)
- ``totalflow``: time-indexed LP pipeline (classes, slack, rounding)
- ``equivalence``: scheduling <-> one-sided interval discrepancy translation
- ``game``: the one-dimensional maker-breaker discrepancy game
- ``sdp``: block expansion, body membership, folded unit-vector relaxation
- ``cli``: command-line driver
"""

__version__ = "0.1.0"
