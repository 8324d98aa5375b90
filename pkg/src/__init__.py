"""
kerrsim - weak cross-Kerr + homodyne optical quantum gate simulator.
"""

__version__ = "1.0.0"
