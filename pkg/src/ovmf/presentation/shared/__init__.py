"""Shared presentation layer utilities."""
