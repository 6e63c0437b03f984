"""Exception types raised by the toolkit."""

from __future__ import annotations


class ProftreeError(Exception):
    """Base class for all domain errors raised by this package."""


class UnmatchedEnd(ProftreeError):
    """An End event arrived with an empty region stack or a mismatched name."""

    def __init__(self, name: str, pid: int, tid: int, timestamp_us: float,
                 expected: str | None = None):
        self.name = name
        self.pid = pid
        self.tid = tid
        self.timestamp_us = timestamp_us
        self.expected = expected
        detail = f"expected {expected!r}" if expected is not None else "no region open"
        super().__init__(
            f"end of region {name!r} at {timestamp_us}us "
            f"(pid={pid}, tid={tid}): {detail}"
        )


class UnclosedBegin(ProftreeError):
    """Begin events were still open at end of input."""

    def __init__(self, open_regions: list[tuple[str, int, int]]):
        self.open_regions = list(open_regions)
        names = ", ".join(
            f"{name!r} (pid={pid}, tid={tid})" for name, pid, tid in self.open_regions
        )
        super().__init__(f"regions still open at end of input: {names}")


class NonNestedIntervals(ProftreeError):
    """Two intervals on one thread partially overlap instead of nesting."""

    def __init__(self, pid: int, tid: int,
                 first: tuple[str, float, float], second: tuple[str, float, float]):
        self.pid = pid
        self.tid = tid
        self.first = first
        self.second = second
        super().__init__(
            f"intervals on pid={pid} tid={tid} overlap without nesting: "
            f"{first[0]!r} [{first[1]}, {first[2]}] vs "
            f"{second[0]!r} [{second[1]}, {second[2]}]"
        )


class MalformedDocument(ProftreeError):
    """Input is not valid JSON or does not have the expected shape."""


class MissingField(ProftreeError):
    """A required field is absent from an event object."""

    def __init__(self, event_index: int, field: str):
        self.event_index = event_index
        self.field = field
        super().__init__(f"event {event_index}: missing required field {field!r}")


class DanglingPath(ProftreeError):
    """A profile node path whose parent prefix is absent from the document."""

    def __init__(self, path: tuple[str, ...]):
        self.path = tuple(path)
        super().__init__(f"node path {'/'.join(path)!r} has no parent node")


class DuplicatePath(ProftreeError):
    """The same node path appears twice in one profile document."""

    def __init__(self, path: tuple[str, ...]):
        self.path = tuple(path)
        super().__init__(f"duplicate node path {'/'.join(path)!r}")


class UndefinedMetric(ProftreeError):
    """A metric that requires samples was requested on an empty node."""

    def __init__(self, metric: str):
        self.metric = metric
        super().__init__(f"metric {metric!r} is undefined on a node with count 0")


class EmptyInput(ProftreeError):
    """An operation that requires at least one input received none."""


class NoMatchingNodes(ProftreeError):
    """A comparison summary filter matched no ratio-bearing nodes."""


class NonLifoEnd(ProftreeError):
    """end_region called on a handle that is not the top of the region stack."""

    def __init__(self, name: str, expected_top: str | None):
        self.name = name
        self.expected_top = expected_top
        top = f"expected top is {expected_top!r}" if expected_top else "stack is empty"
        super().__init__(f"region {name!r} ended out of LIFO order: {top}")


class EndOnWrongThread(ProftreeError):
    """end_region called from a thread other than the one that opened it."""

    def __init__(self, name: str, opened_tid: int, closing_tid: int):
        self.name = name
        self.opened_tid = opened_tid
        self.closing_tid = closing_tid
        super().__init__(
            f"region {name!r} opened on tid {opened_tid} "
            f"but ended on tid {closing_tid}"
        )
