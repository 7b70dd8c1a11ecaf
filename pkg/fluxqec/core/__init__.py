"""Core modules for fluxqec.
"""
