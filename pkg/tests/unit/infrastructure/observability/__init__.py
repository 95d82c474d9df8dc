"""Unit tests for the Prometheus adapter and stage tracking."""
