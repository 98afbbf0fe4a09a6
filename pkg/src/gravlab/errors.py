"""Exception hierarchy.

Every error carries a ``kind`` (the class name) so that benchmark runs can
record failures as structured report rows instead of aborting.
"""

from __future__ import annotations


class GravlabError(Exception):
    """Base class for all gravlab errors."""

    def __init__(self, message: str = "", *, ball_id: str | None = None):
        super().__init__(message)
        self.ball_id = ball_id

    @property
    def kind(self) -> str:
        return type(self).__name__

    def __str__(self) -> str:
        msg = super().__str__()
        if self.ball_id is not None:
            return f"[{self.ball_id}] {msg}"
        return msg


# scene
class NonPositiveDepth(GravlabError, ValueError):
    pass


class ManifestParseError(GravlabError, ValueError):
    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field


class ManifestValidationError(GravlabError, ValueError):
    def __init__(self, violations: list[str], *, scene_id: str | None = None):
        head = f"scene {scene_id!r}: " if scene_id else ""
        super().__init__(head + "; ".join(violations))
        self.violations = list(violations)
        self.scene_id = scene_id


# simulate
class NonPositiveGravity(GravlabError, ValueError):
    pass


class DegradationMismatch(GravlabError, ValueError):
    pass


class DegradationParseError(GravlabError, ValueError):
    pass


class TrajectoryParseError(GravlabError, ValueError):
    def __init__(self, message: str, *, row: int | None = None):
        super().__init__(f"row {row}: {message}" if row is not None else message)
        self.row = row


# detect
class DetectionError(GravlabError):
    pass


class TooFewSamples(DetectionError):
    pass


class NoImpact(DetectionError):
    pass


class BallNotFalling(DetectionError):
    pass


class DistanceNeverReached(DetectionError):
    pass


# metrics
class NonPositiveTime(GravlabError, ValueError):
    pass


class NonPositiveRadius(GravlabError, ValueError):
    pass


class EmptyCalibration(GravlabError, ValueError):
    pass


class CalibrationLeakage(GravlabError):
    pass


class MissingSeedGroup(GravlabError):
    pass


class DegenerateTrajectory(GravlabError):
    pass


class DegenerateFit(GravlabError):
    pass


# bench
class MissingTrajectory(GravlabError):
    pass


class EmptyRun(GravlabError):
    pass


class ReportConsistencyError(GravlabError):
    pass
