"""Ground-truth labeling pipeline for ultrasonic parking-space detections."""

__version__ = "0.1.0"
