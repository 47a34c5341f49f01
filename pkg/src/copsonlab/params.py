from dataclasses import dataclass
from typing import Optional

from .errors import SpecError


@dataclass(frozen=True)
class Params:
    """Exponents shared by every inequality: p, c (in the Lambda**-c weight) and alpha.

    ``reverse`` asks for the reversed inequality (the 0 < p < 1 cases).
    """

    p: float
    c: Optional[float] = None
    alpha: Optional[float] = None
    reverse: bool = False

    def __post_init__(self):
        if not (self.p > 0):
            raise SpecError("p must be positive")
        for name in ("p", "c", "alpha"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, float(v))
