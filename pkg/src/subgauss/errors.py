"""Exception hierarchy.

Everything derives from ``SubGaussError`` (itself a ``ValueError``) so callers
that only care about bad input can catch one type.
"""


class SubGaussError(ValueError):
    pass


class UnsupportedPair(SubGaussError):
    """No closed form for this (law, alpha) pair; use a numeric path."""


class NoFiniteMgf(SubGaussError):
    """E exp(|X|^alpha / t^alpha) stays above 2 for every bracketed t."""


class TooFewSamples(SubGaussError):
    pass


class BadK(SubGaussError):
    pass


class BadMoments(SubGaussError):
    pass


class BadDelta(SubGaussError):
    pass


class OutOfRange(SubGaussError):
    pass


class EnumerationTooLarge(SubGaussError):
    pass


class MeanZeroRequired(SubGaussError):
    pass


class DeltaTooLarge(SubGaussError):
    pass


class HypothesisUnmet(SubGaussError):
    pass


class DegenerateFit(SubGaussError):
    pass


class RankDeficient(SubGaussError):
    pass
