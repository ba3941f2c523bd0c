"""spweil: a verification and experimentation toolkit for quadratic forms in
eight variables, built around the symplectic element of a form, the Weil
representation of Sp8(Z/qZ), complete exponential sums, measure convolution
on finite matrix groups, and circle-method local densities."""

from .quadform import E1, QuadForm, is_generic, matrix_discriminant

__all__ = ["E1", "QuadForm", "is_generic", "matrix_discriminant"]
__version__ = "0.1.0"
