"""Numerical Morse complexes for gradient-like flows.

Subpackages and modules:

``grassmann``
    subspaces, Fredholm pairs, orientations
``hyperbolic``
    hyperbolic operators and spectral splittings
``ode_operator``
    linear nonautonomous equations, stable and unstable spaces
``local_dynamics``
    local unstable manifolds by the graph transform
``morse``
    rest points, connecting orbits, signs, the complex and its homology
``beta``
    interval calculus for the measure of non-compactness
``cli``
    command line entry point
"""

__version__ = "0.1.0"
