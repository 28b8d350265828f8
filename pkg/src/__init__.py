"""Koopman-based identification and control of a simulated voxel tower."""
