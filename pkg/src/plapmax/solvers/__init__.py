"""Newton, eigenvalue and boundary-value solvers."""
