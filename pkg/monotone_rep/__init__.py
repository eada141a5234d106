"""
monotone_rep: convex representations of monotone operators in R^n.
Fitzpatrick functions, conjugates and the Brønsted-Rockafellar refinement.
"""
from .operators import PrimalDualPoint, MonotoneOperator, duality_product
from .convexfn import ConvexFunction, conjugate, fenchel_young_gap, fenchel_duality
from .representations import Bifunction, fitzpatrick, sigma, translate, check_dual_condition
from .refine import regularized_min, br_step, br_refine, br_refine_scaled, strict_br, maximality_probe

__version__ = "0.1.0"
