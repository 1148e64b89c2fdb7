from .core import *
from . import utils
from . import scenario
from . import signal_metrics
from . import receivers
from . import conic
from . import sca
from . import baselines
from . import analyze
from . import experiment
from . import validate
