"""Produce frozen contextual-embedding archive files from pretrained models.

The archive byte format is the contract boundary with downstream consumers;
this package implements its own writer and never imports them.
"""

__version__ = "0.1.0"
