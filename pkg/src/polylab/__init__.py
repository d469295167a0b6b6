"""Discrete polyconvex energies, deformation admissibility checks and a
flip-free constrained minimizer on simplicial meshes."""

__version__ = "0.1.0"
