"""Exception hierarchy. The CLI maps these onto exit codes."""


class MartrepError(Exception):
    pass


class StructuralError(MartrepError):
    """A model object violates a structural invariant (bad partition, grid mismatch...)."""

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class DegenerateCellError(MartrepError):
    def __init__(self, time_index: int, cell: int):
        self.time_index = time_index
        self.cell = cell
        super().__init__(f"cell {cell} at time index {time_index} has zero measure")


class ContractError(MartrepError):
    """An operation's precondition does not hold."""


class AssumptionError(MartrepError):
    """A required assumption (decoupling, uniqueness, m.m.m., ...) fails."""

    def __init__(self, assumption: str, detail: str = ""):
        self.assumption = assumption
        super().__init__(f"assumption {assumption} fails" + (f": {detail}" if detail else ""))


class UnsupportedModelError(MartrepError):
    pass


class InternalConsistencyError(MartrepError):
    """Two independent computation routes disagree."""
