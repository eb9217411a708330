"""Style-conditioned polyphonic music generation over piano rolls."""

__version__ = "0.1.0"
