"""Exception type shared by every module.

Errors carry a short machine-readable ``code`` (for example ``"dim_mismatch"``)
and the module that raised them, so the command line front end can report a
qualified code such as ``geometry.dim_mismatch``.
"""


class VolspanError(ValueError):
    """Raised for every recoverable failure in the toolkit.

    Parameters
    ----------
    code : str
        Short error identifier.
    message : str
        Human readable explanation.
    module : str
        Name of the raising module.
    **details
        Extra diagnostic values (ranks, residuals, iteration counts...).
    """

    def __init__(self, code, message="", module="volspan", **details):
        self.code = code
        self.module = module
        self.details = details
        super().__init__(f"[{module}.{code}] {message}" if message else f"[{module}.{code}]")

    @property
    def qualified_code(self):
        return f"{self.module}.{self.code}"

    def to_dict(self):
        out = {"error": self.qualified_code, "code": self.code, "message": str(self)}
        out.update({k: _jsonable(v) for k, v in self.details.items()})
        return out


def _jsonable(v):
    try:
        import numpy as np
        if isinstance(v, np.generic):
            return v.item()
        if isinstance(v, np.ndarray):
            return v.tolist()
    except ImportError:  # pragma: no cover
        pass
    return v
