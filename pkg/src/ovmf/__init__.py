"""ovmf - generalized eigenforms at critical CM points via overconvergent forms."""
__version__ = "0.1.0"
__author__ = "Number Theory Tooling Team"
