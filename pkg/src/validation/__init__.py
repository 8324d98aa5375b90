"""Truncated Fock-space oracle used to certify the branch engine."""
