from .config import *
from .dataset import *
from .methods import *
from .ordering import *
from .report import *
from .runner import *
from .shifts import *
from .sweep import *
