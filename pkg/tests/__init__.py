"""Tests for fluxqec.
"""
