"""End-to-end pipeline runs."""
