"""Planar FEM toolkit for buckling, Stokes and constrained-vorticity spectra.

Meshes parametric star-shaped domains, assembles Morley / Taylor-Hood /
Lagrange discretizations, solves the associated generalized eigenproblems,
and measures the overdetermined-boundary residuals (constant boundary
vorticity, Neumann pressure data, Schiffer pair) that single out the disc.
"""

__version__ = "0.1.0"
