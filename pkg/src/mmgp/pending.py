"""A tiny future for event-driven state machines on the virtual clock.

asyncio would drag the wall clock in; this is the minimal "resolve me
later" cell the single-threaded simulation loop needs.
"""


class Pending:
    __slots__ = ("done", "_value", "_error", "_callbacks")

    def __init__(self):
        self.done = False
        self._value = None
        self._error = None
        self._callbacks = []

    def resolve(self, value=None):
        if self.done:
            return
        self.done = True
        self._value = value
        for fn in self._callbacks:
            fn(self)

    def fail(self, error: Exception):
        if self.done:
            return
        self.done = True
        self._error = error
        for fn in self._callbacks:
            fn(self)

    @property
    def failed(self) -> bool:
        return self.done and self._error is not None

    @property
    def error(self):
        return self._error

    def result(self):
        if not self.done:
            raise RuntimeError("operation has not completed")
        if self._error is not None:
            raise self._error
        return self._value

    def on_done(self, fn):
        if self.done:
            fn(self)
        else:
            self._callbacks.append(fn)
