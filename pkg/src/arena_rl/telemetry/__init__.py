"""Experiment tooling: config files, metrics, evaluation, replays and the CLI."""
