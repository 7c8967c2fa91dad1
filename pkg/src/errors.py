class MintError(Exception):
    """Base class of every error raised by mint_tta"""


class ConfigError(MintError):
    pass


class ShapeError(MintError):
    def __init__(self, operation: str, *shapes: tuple[int, ...]):
        self.operation = operation
        self.shapes = shapes
        super().__init__(f"{operation}: incompatible shapes " + " and ".join(str(tuple(s)) for s in shapes))


class ContractError(MintError):
    pass


class NonFiniteError(MintError):
    pass


class GenerationError(MintError):
    pass
