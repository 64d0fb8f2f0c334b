"""voxbot: a voxel world server with a dialogue-driven builder assistant."""

__version__ = "0.1.0"
