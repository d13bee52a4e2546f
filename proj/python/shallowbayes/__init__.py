"""Python bindings for the shallowbayes C++ library.

Everything lives in the compiled ``_core`` module; names mirror the C++ API.
"""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
