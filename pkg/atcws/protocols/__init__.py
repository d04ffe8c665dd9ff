"""Protocol encodings: μTESLA, LEAP+ and LiSP."""

from . import leap, lisp, mutesla
from .common import (
    ProtocolEntry,
    ProtocolInstance,
    abstraction_gaps,
    attacked_by_script,
    build,
    entries,
    entry,
    label_gaps,
    list_protocols,
    replay_attack,
    scripted_attacker,
    system_gaps,
)

__all__ = [
    "ProtocolEntry",
    "ProtocolInstance",
    "abstraction_gaps",
    "attacked_by_script",
    "build",
    "entries",
    "entry",
    "label_gaps",
    "leap",
    "lisp",
    "list_protocols",
    "mutesla",
    "replay_attack",
    "scripted_attacker",
    "system_gaps",
]
