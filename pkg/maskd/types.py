"""Type definitions for maskd.

This module contains:
- Exception hierarchy for structured error handling
- Result types for operations that may legitimately find nothing
- Sequence value objects shared by the model, masking and corpus layers

# Dataclass vs Pydantic
#
# DATACLASSES (numeric core): SegmentLayout, Sequence, selection entries,
#   diagnostics intermediates - never cross a process boundary on their own.
# PYDANTIC MODELS (edges): configs, checkpoint files, corpus records,
#   diagnostics lines - validated on the way in, serialized on the way out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Generic, TypeVar

import numpy as np

# =============================================================================
# Exceptions
# =============================================================================


class MaskdError(Exception):
    """Base for all maskd errors."""

    pass


class BrokenInvariant(MaskdError):
    """Setup/config error - cannot continue."""

    pass


class ConfigError(BrokenInvariant):
    """A configuration value violates a documented constraint."""

    pass


class InvariantViolation(BrokenInvariant):
    """A data structure breaks one of its invariants (e.g. a future position in a selection)."""

    pass


class DimensionError(MaskdError, ValueError):
    """Operand shapes do not agree."""

    def __init__(self, op: str, *shapes: tuple[int, ...]) -> None:
        self.op = op
        self.shapes = shapes
        rendered = " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {rendered}")


class RankError(DimensionError):
    """A scalar was required."""

    pass


class NumericError(MaskdError):
    """A computation produced NaN or Inf."""

    pass


class DivergenceUndefined(NumericError):
    """KL(p||q) is infinite: q is zero where p has mass."""

    pass


class UnreadyParameter(MaskdError):
    """Optimizer asked to step a parameter with no gradient."""

    pass


class CapacityError(MaskdError):
    """Sequence would exceed the model's max_seq_len."""

    pass


class DataError(MaskdError):
    """Input data is empty or unusable."""

    pass


class EmptyDistillSet(DataError):
    """The generating model produced no correct trace, so nothing can be distilled."""

    def __init__(self, total: int, accuracy: float, source: str = "teacher") -> None:
        self.total = total
        self.accuracy = accuracy
        self.source = source
        super().__init__(f"No correct {source} traces out of {total} prompts ({source} accuracy {accuracy:.3f})")


class TrainingAborted(MaskdError):
    """Loss became non-finite; the run stopped and left a diagnostics dump."""

    def __init__(self, message: str, dump_path: str | None = None, last_good: str | None = None) -> None:
        self.dump_path = dump_path
        self.last_good = last_good
        super().__init__(message)


class UnknownOption(MaskdError, ValueError):
    """Value is not one of the supported enumeration members."""

    def __init__(self, kind: str, value: object, allowed: list[str] | tuple[str, ...]) -> None:
        self.kind = kind
        self.value = value
        super().__init__(f"Unknown {kind} {value!r}; expected one of: {', '.join(allowed)}")


# =============================================================================
# Result Types
# =============================================================================

T = TypeVar("T")


@dataclass
class Success(Generic[T]):
    """Operation returned data."""

    data: T


@dataclass
class NoResults:
    """Operation ran but there was nothing to return."""

    pass


# =============================================================================
# Sequences
# =============================================================================


@dataclass(frozen=True)
class Span:
    """Half-open [start, end) range of absolute positions."""

    start: int
    end: int

    def __len__(self) -> int:
        return self.end - self.start

    def __contains__(self, position: object) -> bool:
        return isinstance(position, (int, np.integer)) and self.start <= position < self.end

    def positions(self) -> range:
        return range(self.start, self.end)


@dataclass(frozen=True)
class SegmentLayout:
    """Partition of a sequence into visual, question and response spans.

    Spans are contiguous, ordered visual -> question -> response, and
    together cover [0, total).
    """

    visual: Span
    question: Span
    response: Span

    def __post_init__(self) -> None:
        if self.visual.start != 0:
            raise InvariantViolation(f"visual span must start at 0, got {self.visual.start}")
        for name, span in (("visual", self.visual), ("question", self.question), ("response", self.response)):
            if span.end < span.start:
                raise InvariantViolation(f"{name} span is reversed: [{span.start}, {span.end})")
        if self.question.start != self.visual.end or self.response.start != self.question.end:
            raise InvariantViolation(
                f"spans are not contiguous: visual={self.visual}, question={self.question}, response={self.response}"
            )

    @classmethod
    def from_lengths(cls, visual: int, question: int, response: int) -> SegmentLayout:
        v = Span(0, visual)
        q = Span(v.end, v.end + question)
        r = Span(q.end, q.end + response)
        return cls(visual=v, question=q, response=r)

    @property
    def total(self) -> int:
        return self.response.end

    def response_position(self, n: int) -> int:
        """Absolute position of 1-based response index n."""
        return self.response.start + n - 1


@dataclass(frozen=True)
class Sequence:
    """Token ids plus their segment layout."""

    token_ids: np.ndarray
    layout: SegmentLayout
    answer: int | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        ids = np.asarray(self.token_ids, dtype=np.int64)
        object.__setattr__(self, "token_ids", ids)
        if ids.ndim != 1 or len(ids) != self.layout.total:
            raise InvariantViolation(f"layout covers {self.layout.total} positions but sequence has {ids.shape}")

    def __len__(self) -> int:
        return len(self.token_ids)

    @property
    def prompt_ids(self) -> np.ndarray:
        """Visual + question tokens (everything before the response)."""
        return self.token_ids[: self.layout.response.start]

    @property
    def response_ids(self) -> np.ndarray:
        return self.token_ids[self.layout.response.start :]
