"""Random fixed points and best approximations for set-valued operators on R and R^2."""

__version__ = "0.1.0"
