"""contactgen: planar contact-rich manipulation data generation.

Pipeline: record demonstrations through the interactive simulator, retarget
them kinematically onto a robot embodiment, then track them with a
sampling-based trajectory optimizer under domain randomization to emit
dynamically consistent episode datasets.
"""

__version__ = "0.1.0"
