"""Force density on a conducting wall from a polarizable atom (far zone).

Three independent routes to the same reduced profile:

* :mod:`cpwall.closedform`: the analytic density and derived plate
  quantities (total force, enclosed fractions, torques);
* :mod:`cpwall.quadpath`: nested quadrature of the regulated integral
  representation;
* :mod:`cpwall.modesum`: a cutoff-weighted sum over cavity mode pairs.
"""

__version__ = "0.1.0"
