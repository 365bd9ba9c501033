"""Post-void electromigration stress statistics for interconnect trees.

Closed-form single-segment solutions are stitched together at junctions by
a Bayesian network that predicts boundary flux rates; posterior samples
drawn with Hamiltonian Monte Carlo give the mean and spread of stress under
current variation.  A finite-difference solver provides the reference.
"""

from .core import (InitialStressProfile, InterconnectTree, Junction, MaterialParams, ScalingConstants, Segment,
                   StressField, diffusivity, drive_force, scale_problem, unscale_stress, validate_tree)

__version__ = "0.1.0"

__all__ = [
    "InitialStressProfile", "InterconnectTree", "Junction", "MaterialParams", "ScalingConstants", "Segment",
    "StressField", "diffusivity", "drive_force", "scale_problem", "unscale_stress", "validate_tree",
]
