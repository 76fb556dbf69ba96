"""Volumetric building reconstruction from indoor point clouds.

Pipeline: plane detection -> outlier removal -> room labeling ->
surface/wall candidates -> cell complex -> priors -> 0-1 ILP -> model.
"""

__version__ = "0.1.0"
