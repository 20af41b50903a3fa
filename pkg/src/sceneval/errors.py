"""Exception types shared across the toolkit.

ValidationError covers malformed inputs and contract violations (CLI exit
code 2); NumericalError covers numerical failures such as eigensolver
non-convergence or an impossibly negative distance (CLI exit code 3).
"""


class SceneEvalError(Exception):
    pass


class ValidationError(SceneEvalError):
    pass


class NumericalError(SceneEvalError):
    pass
