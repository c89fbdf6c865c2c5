from .encoding import *  # noqa: F401,F403
from .gates import *  # noqa: F401,F403
from .boson import *  # noqa: F401,F403
from .chm import *  # noqa: F401,F403
