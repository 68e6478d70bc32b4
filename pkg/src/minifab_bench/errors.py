"""Exception types shared across the package."""


class ConstructionError(ValueError):
    """A model network is malformed (bad coupling, unknown port, invalid config)."""


class ModelError(RuntimeError):
    """A model violated its behavioral contract during simulation."""


class ContractError(ValueError):
    """A function was called with inputs outside its documented domain."""


class DegenerateInputError(ValueError):
    """Input data is valid in shape but degenerate (e.g. zero variance)."""


class LookupFailure(KeyError):
    """A requested component or variable does not exist in a trace."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""
