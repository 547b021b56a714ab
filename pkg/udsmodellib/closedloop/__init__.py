"""
Closed-loop simulation, KPI accounting and reports
"""

from .scenario import *
from .runner import *
from .report import *
