from uolens._uolens import *  # noqa: F401,F403
from uolens._uolens import __doc__  # noqa: F401

__version__ = "0.1.0"
