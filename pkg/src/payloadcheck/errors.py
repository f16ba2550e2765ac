"""Exception hierarchy shared by all modules."""


class PayloadCheckError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(PayloadCheckError, ValueError):
    pass


class NonFiniteInput(PayloadCheckError, ValueError):
    pass


# model ingestion


class ModelError(PayloadCheckError):
    pass


class MalformedXml(ModelError):
    pass


class BranchingChain(ModelError):
    pass


class MissingInertial(ModelError):
    pass


class InvalidLimit(ModelError):
    pass


class NonUnitAxis(ModelError):
    pass


class MalformedPayload(ModelError):
    pass


# kinematics / trajectory synthesis


class NoConvergence(PayloadCheckError):
    pass


class SingularityStall(PayloadCheckError):
    pass


class JointLimitHit(PayloadCheckError):
    pass


class VelocityLimitHit(PayloadCheckError):
    pass


class IkFailure(PayloadCheckError):
    pass


class MalformedTrajectory(PayloadCheckError, ValueError):
    pass


class EmptyTrajectory(PayloadCheckError, ValueError):
    pass
