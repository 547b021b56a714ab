from .params import *
from .model import *
