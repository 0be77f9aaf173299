"""Comparing many predictive models across datasets: naive averaging,
Friedman/Nemenyi ranks, and a hierarchical Bayesian test with ROPE decisions."""

__version__ = "0.1.0"
