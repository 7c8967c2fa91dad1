from .config import *
from .dual_encoder import *
from .weights import *
