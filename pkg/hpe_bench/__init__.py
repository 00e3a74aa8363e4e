"""HPE Bench - restart ACG and proximal bundle solvers for composite convex problems."""
