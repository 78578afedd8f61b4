"""Experiment harness: configs, runs, statistics tables and property checks."""
