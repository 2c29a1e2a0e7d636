"""Toolkit for normalized object coordinates and 9DoF box estimation.

Submodules:

* geometry - camera model, rotations, oriented-box primitives
* nocs     - normalized-coordinate map construction and persistence
* solvers  - pose recovery (depth-from-orientation, EPnP, Umeyama)
* losses   - training losses with analytic gradients
* metrics  - map-quality, localization, orientation, and mAP evaluation
* dataset  - on-disk shards, taxonomy, orientation canonicalization
* synth    - analytic ray-cast renderer and noise injection (test oracle)
* cli      - command-line pipeline driver
"""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    CameraIntrinsics,
    OrientedBox3D,
    RigidPose,
    Rotation6D,
    UnitRay,
)
from .nocs import DepthMap, InstanceMask, NocsMap  # noqa: F401
