"""Unsupervised phase discovery for the extended Bose-Hubbard chain.

The package has three layers: a charge-conserving DMRG engine for ground
states (symmetry, mps, model, dmrg, ed, scans), a from-scratch convolutional
autoencoder with shortcut connections (ae, kernels), and the sweep/anomaly
pipeline plus CLI that tie them together (pipeline, config, cli).
"""

__version__ = "0.1.0"
