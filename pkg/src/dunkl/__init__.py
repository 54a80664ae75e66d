"""Dunkl processes: root systems, exact Dunkl operators and intertwiners,
transition densities, path simulation and chaos expansions.

Submodules are imported explicitly, e.g. ``from dunkl import rootsys, pathsim``.
"""

from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # running from a source tree without install
    __version__ = "0+unknown"
