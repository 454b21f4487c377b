"""Annotation campaign service: decision log, state fold, and HTTP API."""

from .log import DecisionLog, read_log
from .state import (
    Decision,
    TERMINAL_DECISIONS,
    AnnotationDecision,
    CampaignService,
    CampaignState,
    Session,
    export_annotations,
    recover,
)

__all__ = [
    "DecisionLog",
    "read_log",
    "Decision",
    "TERMINAL_DECISIONS",
    "AnnotationDecision",
    "CampaignService",
    "CampaignState",
    "Session",
    "export_annotations",
    "recover",
]
