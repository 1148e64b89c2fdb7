from . import data
from . import linalg
