from .camera import PinholeCamera, Pixel
from .se3 import SE3Pose, batch_skew, look_at, skew

__all__ = ["PinholeCamera", "Pixel", "SE3Pose", "batch_skew", "look_at", "skew"]
