"""Problem oracles, solvers, reference solves and invariant suites."""
