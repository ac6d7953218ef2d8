"""Non-interactive figure generation for monivqa CSV/JSON outputs."""

__version__ = "0.1.0"
