"""Markerless gait capture: Interval Particle Filtering over silhouette likelihoods."""
from .imaging import CameraModel, FleshModel, GrayFrame, SilhouetteImage, default_camera, default_flesh
from .ipf import IPFConfig, Particle, ParticleSet, Trajectory, track, track_silhouettes
from .kinematics import Skeleton, default_skeleton, forward_kinematics

__version__ = "0.1.0"
