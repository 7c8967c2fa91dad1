from .ablate import *
from .generate import *
from .gradcheck import *
from .run import *
from .sweep import *
