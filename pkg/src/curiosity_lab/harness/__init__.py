"""Experiment plumbing: configs, CLI, scripted baseline, checkpoints and studies."""
