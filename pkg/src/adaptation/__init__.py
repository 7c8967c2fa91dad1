from .augment import *
from .config import *
from .engine import *
from .optimizer import *
from .params import *
from .trace import *
