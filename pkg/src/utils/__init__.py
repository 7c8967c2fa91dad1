from .command import *
from .defer import *
from .iter import *
from .jsonconfig import *
from .result import *
from .snapshot import *
