from .errors import *
from .logging import *
from .types import *
from .utils import *
