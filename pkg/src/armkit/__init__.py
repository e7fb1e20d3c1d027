"""armkit: arm kinematics, numerical IK, grasp detection and teleoperation."""

__version__ = "0.1.0"
