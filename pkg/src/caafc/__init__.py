"""Claim decomposition, evidence-grounded verdicts and actionable justifications."""

__version__ = "0.1.0"

from .actionability import ActionabilityScore, LinkProber, LinkProbeResult, RevisionFeedback, synthesize_feedback
from .datasets import DatasetRecord, compare_evidence, clean, detect_mismatches, load_dataset, majority_vote
from .gateway import CallableBackend, FixtureBackend, Gateway, GenerationRequest
from .justification import Justification, justify, refine_loop, revise
from .metrics import classification_report, cohens_kappa, krippendorff_alpha, pearson
from .pipeline import Pipeline, PipelineReport
from .retrieval import EvidenceBundle, EvidenceRetriever, FixtureRetrievalBackend, build_query
from .segmenter import AtomicClaim, ClaimInput, normalize_dialogue, segment
from .verdict import FinalVerdict, SubclaimVerdict, VerdictLabel, aggregate, check_subclaims

__all__ = [
    "ActionabilityScore",
    "AtomicClaim",
    "CallableBackend",
    "ClaimInput",
    "DatasetRecord",
    "EvidenceBundle",
    "EvidenceRetriever",
    "FinalVerdict",
    "FixtureBackend",
    "FixtureRetrievalBackend",
    "Gateway",
    "GenerationRequest",
    "Justification",
    "LinkProbeResult",
    "LinkProber",
    "Pipeline",
    "PipelineReport",
    "RevisionFeedback",
    "SubclaimVerdict",
    "VerdictLabel",
    "aggregate",
    "build_query",
    "check_subclaims",
    "classification_report",
    "clean",
    "cohens_kappa",
    "compare_evidence",
    "detect_mismatches",
    "justify",
    "krippendorff_alpha",
    "load_dataset",
    "majority_vote",
    "normalize_dialogue",
    "pearson",
    "refine_loop",
    "revise",
    "segment",
    "synthesize_feedback",
]
