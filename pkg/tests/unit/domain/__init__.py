"""Unit tests for the number-theoretic core: residues, q-series, bases and checks."""
