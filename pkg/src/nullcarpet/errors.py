"""Exception hierarchy. Each error carries a stable ``code`` used in JSON reports."""


class CarpetError(Exception):
    code = "ERROR"


class UndecidableAtDepth(CarpetError):
    code = "UNDECIDABLE-AT-DEPTH"


class NotComparable(CarpetError):
    code = "NOT-COMPARABLE"


class NotAChain(CarpetError):
    code = "NOT-A-CHAIN"


class EnclosureTooCoarse(CarpetError):
    code = "ENCLOSURE-TOO-COARSE"


class WindowTooDeep(CarpetError):
    code = "WINDOW-TOO-DEEP"


class PreconditionViolated(CarpetError):
    code = "PRECONDITION-VIOLATED"


class DepthInsufficient(CarpetError):
    code = "DEPTH-INSUFFICIENT"


class DepthLimitExceeded(CarpetError):
    """A level scan (e.g. for k0) ran past the configured cap."""

    code = "DEPTH-LIMIT-EXCEEDED"


class MembershipUnavailable(CarpetError):
    code = "MEMBERSHIP-UNAVAILABLE"


class HypothesisViolated(CarpetError):
    code = "HYPOTHESIS-VIOLATED"

    def __init__(self, name, detail=""):
        self.name = name
        super().__init__(f"{name}: {detail}" if detail else name)


class HypothesisFail(HypothesisViolated):
    code = "HYPOTHESIS-FAIL"


class CollinearInput(CarpetError):
    code = "COLLINEAR-INPUT"


class NonConvergent(CarpetError):
    code = "NON-CONVERGENT"


class NoAdmissibleCandidate(CarpetError):
    code = "NO-ADMISSIBLE-CANDIDATE"


class NotFound(CarpetError):
    code = "NOT-FOUND"

    def __init__(self, msg, best_margin=None):
        self.best_margin = best_margin
        super().__init__(msg)


class MalformedCertificate(CarpetError):
    code = "MALFORMED-CERTIFICATE"


class ConfigError(CarpetError):
    code = "CONFIG-INVALID"
