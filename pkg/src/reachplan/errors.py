"""Exception types shared across the toolkit."""


class ReachplanError(Exception):
    """Base class for all toolkit errors."""


class ParseError(ReachplanError):
    """Malformed geometry or configuration input."""


class OutOfReach(ReachplanError):
    """Inverse kinematics target outside the limb workspace or joint limits."""


class DegenerateHull(ReachplanError):
    """Convex hull construction failed (coplanar or insufficient samples)."""


class BudgetExceeded(ReachplanError):
    """Sample rejection rate made the requested database size unreachable."""


class DatabaseMismatch(ReachplanError):
    """Serialized sample database was built for a different robot."""


class DegenerateInput(ReachplanError):
    """Equilibrium query with coincident contact points."""


class DegenerateSupport(ReachplanError):
    """Support polygon undefined (fewer than 3 contacts, or collinear)."""


class StartInvalid(ReachplanError):
    """Guide query start state fails the reachability condition."""


class GoalInvalid(ReachplanError):
    """Guide query goal state fails the reachability condition."""


class NoPathFound(ReachplanError):
    """Guide planner exhausted its iteration budget."""


class SubdivisionExhausted(ReachplanError):
    """Interval bisection could not isolate a single stepping leg."""


class Stuck(ReachplanError):
    """Contact planning stopped making progress."""


class NoCandidate(ReachplanError):
    """Sample database query returned no contact candidates."""


class CandidatesExhausted(ReachplanError):
    """Every ranked contact candidate failed collision or stability checks."""


class InvalidSpec(ReachplanError):
    """Unknown terrain kind or malformed generator parameters."""


class ScenarioError(ReachplanError):
    """Scenario or robot description file failed validation."""


class PipelineError(ReachplanError):
    """A pipeline stage failed; carries the stage label for diagnostics."""

    def __init__(self, stage, cause):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause
