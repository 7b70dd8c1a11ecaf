"""Simulate fluxonium lattices down to surface-code logical error rates.
"""

VERSION = '0.1.0'
