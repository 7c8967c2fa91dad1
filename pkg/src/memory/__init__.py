from .bank import *
from .compose import *
from .retrieval import *
from .reward import *
