"""RIS-aided SFCW radar imaging: simulation and voxel reconstruction."""

__version__ = "0.1.0"
