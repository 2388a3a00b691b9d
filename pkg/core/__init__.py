"""Simulation building blocks: geometry, channels, metrics, sync, stripe bus, campaigns."""
