"""AMP decoding of random linear codes on the many-user Gaussian MAC."""

__version__ = "0.1.0"

from .priors import SectionPrior, FLAT, BINARY  # noqa: F401
