"""Unit tests for settings, logging and observability."""
