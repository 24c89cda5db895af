"""Early-exit decision rule, threshold calibration and audit over replayable
multi-exit inference traces."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401
