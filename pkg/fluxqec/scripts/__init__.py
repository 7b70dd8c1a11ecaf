"""Command line scripts for fluxqec.
"""
