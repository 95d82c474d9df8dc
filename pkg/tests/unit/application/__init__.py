"""Unit tests for application layer."""
