from .tables import *
from .conversion import *
