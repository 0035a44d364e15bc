"""Solver tolerances shared by the LP engines and branch-and-bound."""

FEAS = 1e-7      # primal feasibility
INTEGRALITY = 1e-6
GAP = 1e-6       # relative optimality gap
DUAL = 1e-9      # reduced-cost optimality
PIVOT = 1e-9     # smallest usable pivot magnitude
