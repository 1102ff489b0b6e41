"""Multi-scale early action prediction: Python bindings of the msap core."""

from ._msap import *  # noqa: F401,F403
from ._msap import __doc__  # noqa: F401
