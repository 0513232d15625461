"""Line-length design and analysis for multiline TRL calibration kits."""

__version__ = "0.1.0"
