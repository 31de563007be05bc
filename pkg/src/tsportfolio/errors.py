"""Exception hierarchy shared across the package."""


class PortfolioError(Exception):
    """Base class for all errors raised by tsportfolio."""


class SeriesTooShort(PortfolioError, ValueError):
    pass


class ZeroScale(PortfolioError, ValueError):
    """A metric normalizer evaluated to zero, so the metric is undefined."""


class NoMedian(PortfolioError, ValueError):
    pass


class EmptyInput(PortfolioError, ValueError):
    pass


class EmptyPortfolio(PortfolioError, ValueError):
    pass


class ShapeMismatch(PortfolioError, ValueError):
    pass


class SchemaError(PortfolioError, ValueError):
    pass


class CoverageError(PortfolioError, ValueError):
    pass


class MissingValues(PortfolioError, ValueError):
    pass


class MissingExtras(PortfolioError, ValueError):
    pass


class DegenerateDesign(PortfolioError, ValueError):
    pass


class TooFewRealizations(PortfolioError, ValueError):
    pass


class InconsistentMembers(PortfolioError, ValueError):
    pass


class ManifestError(PortfolioError, ValueError):
    pass
