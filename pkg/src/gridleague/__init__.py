"""Desk-scale RTS league training stack."""

__version__ = "0.1.0"
