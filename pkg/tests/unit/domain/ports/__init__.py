"""Unit tests for the metrics port."""
