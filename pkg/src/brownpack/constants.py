"""Numerical guard constants shared by both kernel backends.

These values are part of the numerical contract of the package: changing
any of them changes simulation output bit-for-bit.
"""

# Cosine clamp applied before arccos. The derivative of arccos diverges at
# cos = +-1; inside the clamped band the gradient is defined to be zero.
EPS_COS = 1e-7

# Below this Euclidean separation two latent points are treated as
# coincident: the contact direction is undefined and the force is zeroed.
EPS_COINCIDENT = 1e-12

# Floor applied to the minimal pair distance entering the adaptive
# time-step formula.
MIN_DIST_FLOOR = 1e-9

# Gradient norms below this are treated as zero when choosing a time-step.
GRAD_NORM_FLOOR = 1e-12
