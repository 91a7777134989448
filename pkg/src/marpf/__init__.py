"""Path planning for AGVs that convey target racks through passage-free grids."""

__version__ = "0.1.0"
