"""trajlab: multi-camera pedestrian trajectory labeling toolkit.

Converts per-camera 2D pedestrian tracks, camera projection matrices,
and a ground-region point sample into human-verified metric-space
trajectories on the plane z=0. Ships a synthetic-scene oracle, a staged
CLI, and an HTTP review service for the human-verification step.
"""

__version__ = "0.1.0"
