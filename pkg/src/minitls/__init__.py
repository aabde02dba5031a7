"""Desk-scale TLS 1.3 / DTLS 1.3 protocol core and wire-overhead bench."""

__version__ = "0.1.0"
