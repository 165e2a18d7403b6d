from .base import *
from .simulation import *
