"""Shared exception types."""


class CollabGraphError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(CollabGraphError):
    """Malformed metamodel document."""

    def __init__(self, message, line=None, col=None):
        super().__init__(message)
        self.line = line
        self.col = col

    def __str__(self):
        base = super().__str__()
        if self.line is not None:
            return f"{base} (line {self.line}, col {self.col})"
        return base


class UnresolvedReferenceError(CollabGraphError):
    def __init__(self, name, context=""):
        super().__init__(f"unresolved reference {name!r}" + (f" in {context}" if context else ""))
        self.name = name


class DuplicateNameError(CollabGraphError):
    def __init__(self, name):
        super().__init__(f"duplicate name {name!r}")
        self.name = name


class UnknownTypeError(CollabGraphError):
    def __init__(self, name):
        super().__init__(f"unknown type {name!r}")
        self.name = name


class UnknownElementError(CollabGraphError):
    def __init__(self, element_id):
        super().__init__(f"unknown element {element_id!r}")
        self.element_id = element_id


class MalformedCommandError(CollabGraphError):
    pass


class NotInvertibleError(CollabGraphError):
    pass


class UnknownModelError(CollabGraphError):
    def __init__(self, model_id):
        super().__init__(f"unknown model {model_id!r}")
        self.model_id = model_id


class SchemaMismatchError(CollabGraphError):
    pass


class DecodeError(CollabGraphError):
    def __init__(self, reason, position=0):
        super().__init__(f"decode error at byte {position}: {reason}")
        self.reason = reason
        self.position = position


class UnknownCommandTypeError(DecodeError):
    def __init__(self, tag, position=0):
        super().__init__(f"unknown command type {tag!r}", position)
        self.tag = tag


class ProtocolError(CollabGraphError):
    pass


class UnknownActionError(CollabGraphError):
    def __init__(self, action_id):
        super().__init__(f"unknown context-menu action {action_id!r}")
        self.action_id = action_id


class NotConnectedError(CollabGraphError):
    pass


class DesyncDetectedError(CollabGraphError):
    """Replica state contradicts a server message outside any pending local edit."""


class InterpreterError(CollabGraphError):
    pass


class NoInstructionError(InterpreterError):
    def __init__(self, type_name):
        super().__init__(f"no instruction registered for type {type_name!r} or its supertypes")
        self.type_name = type_name


class StepLimitExceededError(InterpreterError):
    def __init__(self, max_steps, context):
        super().__init__(f"execution exceeded {max_steps} steps")
        self.max_steps = max_steps
        self.context = context


class InstructionFaultError(InterpreterError):
    def __init__(self, element_id, cause):
        super().__init__(f"instruction for element {element_id!r} failed: {cause}")
        self.element_id = element_id
        self.cause = cause
