from .mpc import *
from .rbc import *
