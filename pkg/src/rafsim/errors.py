"""Exception hierarchy shared by every rafsim module."""


class RafsimError(Exception):
    """Base class for all rafsim errors."""


class InputError(RafsimError):
    """Malformed or inconsistent user input (topology, scenario, CLI values)."""


class InvariantViolation(RafsimError):
    """A simulation finished in a state that breaks a model invariant."""


class ProtocolError(RafsimError):
    """A control message that the receiving side cannot accept."""
