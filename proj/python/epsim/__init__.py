"""Traffic signal control on a point-queue network simulator."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401

CONTROLLERS = {
    "fixedtime": FixedTimeController,  # noqa: F405
    "mp": MaxPressureController,  # noqa: F405
    "efficient-mp": EfficientMaxPressureController,  # noqa: F405
}
