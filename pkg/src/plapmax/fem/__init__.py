"""Piecewise-linear finite elements: meshes, nodal fields and the p-Laplacian calculus."""
