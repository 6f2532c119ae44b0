"""Exception types raised across the package."""


class QdlabError(Exception):
    """Base class for all package errors."""


class NonConvergence(QdlabError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class NearCoincidentPoles(QdlabError):
    pass


class PoleOnDisc(QdlabError):
    pass


class InversionFailure(QdlabError):
    pass


class ResidueIllConditioned(QdlabError):
    pass


class OriginInDomain(QdlabError):
    pass


class InadmissibleTest(QdlabError):
    pass


class RankDeficient(QdlabError):
    pass


class SeedGridExhausted(QdlabError):
    pass


class EpsilonTooLarge(QdlabError):
    pass


class PeriodNonzero(QdlabError):
    pass


class PoleInDroplet(QdlabError):
    pass


class BoxTooSmall(QdlabError):
    pass


class PinchDetected(QdlabError):
    pass


class KindDomainMismatch(QdlabError):
    pass


class ScenarioError(QdlabError):
    pass
