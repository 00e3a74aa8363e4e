"""Experiment, scaling-sweep and verification pipelines."""
