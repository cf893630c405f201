"""
OAM-NFC Link Simulator
======================

Physical-layer model of orbital-angular-momentum multiplexed near-field
links: coil-ring geometry, mutual inductance, channel assembly, OAM
detection with and without channel estimation, and capacity / BER analysis.
"""

__version__ = '1.0.0'
__author__ = 'OAM-NFC Link Study'
# Tested on Python 3.11-3.13 (CPython). tomllib needs 3.11+.
