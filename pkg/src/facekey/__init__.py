"""facekey: facial action-unit streams in, synthetic keyboard events out."""

from .actions import Action, ActionEngine, KeyEvent, MacroDefinition, MacroStep
from .frames import AUFrame, parse_tracker_record
from .profiles import Profile, builtin_profiles, parse_profile, serialize_profile
from .rules import (
    AUCondition,
    DebounceState,
    ExpressionRule,
    Rearm,
    RuleEngine,
    arbitrate,
    debounce_step,
    eval_condition,
    eval_rule,
)
from .runtime import Session, run_offline
from .sinks import CollectingSink, EventLogSink
from .speech import KeywordBinding, TranscriptEvent, admit, match_keywords, normalize
from .streams import StreamSource, open_stream

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ActionEngine",
    "AUCondition",
    "AUFrame",
    "CollectingSink",
    "DebounceState",
    "EventLogSink",
    "ExpressionRule",
    "KeyEvent",
    "KeywordBinding",
    "MacroDefinition",
    "MacroStep",
    "Profile",
    "Rearm",
    "RuleEngine",
    "Session",
    "StreamSource",
    "TranscriptEvent",
    "admit",
    "arbitrate",
    "builtin_profiles",
    "debounce_step",
    "eval_condition",
    "eval_rule",
    "match_keywords",
    "normalize",
    "open_stream",
    "parse_profile",
    "parse_tracker_record",
    "run_offline",
    "serialize_profile",
]
