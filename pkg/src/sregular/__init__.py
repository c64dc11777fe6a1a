"""Counting-function asymptotics for Ahlfors-regular sets.

Subpackages by theme: ``symbolic`` (subshifts, pressure, renewal sums),
``geometry`` (IFS attractors, open-set certification, conformal maps),
``counting`` (separated/packing/covering numbers, parallel volume),
``trees`` (regularity-certifying trees), ``asymptotics`` (curves,
dimension fits, oscillation diagnostics), ``cli`` (command line).
"""

__version__ = "0.1.0"

from . import asymptotics, counting, geometry, symbolic, trees  # noqa: F401
