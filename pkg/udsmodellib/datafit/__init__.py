from .templates import *
from .fitting import *
