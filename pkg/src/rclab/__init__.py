"""rclab: geometry, dynamics, and symmetric reduction of regular controlled
Lagrangian systems.

The package is organized bottom-up:

- ``rclab.expr``       expression DSL, parser, and second-order forward AD
- ``rclab.geometry``   configuration spaces, (co)tangent points, two-forms, point maps
- ``rclab.lagrangian`` Lagrangian systems, the Legendre transform and its inverse
- ``rclab.dynamics``   Euler-Lagrange fields, Hamiltonian side, integration
- ``rclab.control``    forces, control subsets/laws, vertical lifts, equivalence
- ``rclab.symmetry``   translation symmetries, momentum maps, Lie-algebra data
- ``rclab.reduction``  point/orbit reduction, reduced dynamics, theorem harness
- ``rclab.sysdef``     JSON system/pair files, built-in examples, check suites
- ``rclab.cli``        the ``rclab`` command-line interface
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
