"""Numerical laboratory for Dixmier traces in general weak and Lorentz ideals.

Modules
-------
regvar        regularly varying normalizing functions and Karamata limits
ideals        singular sequences and ideal quasi-norms
traces        Dixmier-trace and zeta-residue estimators
torus_op      toroidal symbols, quantization and lattice sums
modulated     modulation norms and their symbol-side criteria
logclassical  log-classical symbols, residues and the trace formula
cli           the ``dixmier-lab`` command line
"""

__version__ = "0.1.0"
