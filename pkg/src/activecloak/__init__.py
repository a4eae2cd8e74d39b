"""Active exterior cloaking controls for the 2D Helmholtz equation.

A density on a small circular antenna is chosen so that its double layer
potential reproduces a given incident field on a control region and stays
small on a distant circle.  The density is found by Tikhonov regularisation
with the parameter fixed by the discrepancy principle.
"""

__version__ = "0.1.0"
