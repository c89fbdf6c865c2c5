"""Virtual hardware model and its calibration procedures."""

from .hardware import *  # noqa: F401,F403
from .hardware import __all__ as _hw_all
from .fringe import *  # noqa: F401,F403
from .fringe import __all__ as _fr_all
from .calibration import *  # noqa: F401,F403
from .calibration import __all__ as _cal_all
from .experiment import *  # noqa: F401,F403
from .experiment import __all__ as _ex_all

__all__ = list(_hw_all) + list(_fr_all) + list(_cal_all) + list(_ex_all)
