"""Exception hierarchy.

Input and configuration problems derive from :class:`InputError`; anything
that means "the model or the data do not support an answer" derives from
:class:`ModelViolationError`.  The command line maps the first family to exit
code 2 and the second to exit code 3.
"""


class LgtError(Exception):
    """Base class for all package errors."""


class InputError(LgtError, ValueError):
    """Malformed or inconsistent user input."""


class ConfigError(InputError):
    """Experiment configuration failed validation."""


class NewickError(InputError):
    """Malformed Newick text."""


class HighwaySpecError(InputError):
    """Highway specification violates the galled-cycle assumption."""


class ModelViolationError(LgtError):
    """An event or a dataset is inconsistent with the LGT model."""


class GenerationError(ModelViolationError):
    """A random generator could not produce a valid object."""


class DegenerateTopologyError(ModelViolationError):
    """A restriction to four taxa is not resolved."""


class SaturationError(ModelViolationError):
    """The log-det distance is undefined at this sequence length."""


class ReconstructionAbort(ModelViolationError):
    """A reconstruction algorithm hit one of its abort conditions."""


class UncoveredQuartetError(ReconstructionAbort):
    def __init__(self, taxa):
        self.taxa = tuple(taxa)
        super().__init__(f"four-tuple {self.taxa} is displayed by no gene tree")


class IncompatibleCoverError(ReconstructionAbort):
    """No tree agrees with every quartet of the cover.

    ``witness`` is the cover's quartet on a four-tuple where the greedy
    candidate tree disagrees; ``candidate`` is that tree.
    """

    def __init__(self, witness, candidate_quartet, candidate=None):
        self.witness = witness
        self.candidate_quartet = candidate_quartet
        self.candidate = candidate
        super().__init__(
            f"quartet cover is incompatible: cover has {witness}, "
            f"best candidate tree has {candidate_quartet}"
        )


class UnsupportedPairError(ReconstructionAbort):
    def __init__(self, a, b):
        self.pair = (a, b)
        super().__init__(f"pair ({a}, {b}) is not displayed by any gene")
