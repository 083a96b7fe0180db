"""Model auto-selection by pitch-trend distance.

Each stage-2 candidate separates the mixed vocal into two channels; the
channels are pitch-tracked and scored by how closely their frame-to-frame
pitch trends move together. Per trend index i, the term |vA_i - vB_i|
counts only when the three pitch frames i-1, i, i+1 are voiced on BOTH
channels (a sliding window of three, so passages where only one singer is
audible are skipped). A channel that is unvoiced everywhere earns the
penalty sentinel, which disqualifies degenerate separations that dump one
singer into silence. The candidate with the smallest score wins.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .audio import Waveform
from .backends import CandidateModel, run_backend
from .errors import (
    BackendFailureError,
    ContractViolationError,
    FrameMismatchError,
    TooShortError,
)
from .pitch import PitchConfig, PitchTrack, to_semitones, track_pitch

log = logging.getLogger(__name__)

# Strictly above any achievable finite score (frames x fmax is orders less).
PENALTY_SCORE = 1e12


@dataclass
class TrendScore:
    model_id: str
    score: float
    contributing_frames: int = 0
    penalized: bool = False
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "score": self.score,
            "contributing_frames": self.contributing_frames,
            "penalized": self.penalized,
            "error": self.error,
        }


def trend(p: PitchTrack) -> np.ndarray:
    """Frame-to-frame pitch difference v_i = p_{i+1} - p_i, zeros included."""
    if len(p) < 2:
        raise TooShortError(f"need at least 2 frames, got {len(p)}")
    return np.diff(p.pitches_hz)


def trend_distance(pa: PitchTrack, pb: PitchTrack) -> TrendScore:
    """Sum of |vA_i - vB_i| over trend indices whose voicing window holds.

    The window for v_i is pitch frames i-1, i, i+1 (indexed at v's left
    endpoint); indices whose window leaves the track are masked out. If
    every frame of either channel is unvoiced the penalty sentinel is
    returned instead of a sum.
    """
    if len(pa) != len(pb):
        raise FrameMismatchError(f"frame counts differ: {len(pa)} vs {len(pb)}")
    if abs(pa.hop_seconds - pb.hop_seconds) > 1e-12:
        raise FrameMismatchError(
            f"hops differ: {pa.hop_seconds} vs {pb.hop_seconds}")
    if len(pa) < 3:
        raise FrameMismatchError(f"need at least 3 frames, got {len(pa)}")

    a = pa.pitches_hz
    b = pb.pitches_hz
    if not a.any() or not b.any():
        return TrendScore(model_id="", score=PENALTY_SCORE, penalized=True)

    va = np.diff(a)
    vb = np.diff(b)
    voiced = (a > 0) & (b > 0)
    # window over v index i: pitch frames i-1, i, i+1; i=0 falls off the edge
    idx = np.arange(1, len(va))
    mask = voiced[idx - 1] & voiced[idx] & voiced[idx + 1]
    terms = np.abs(va[idx] - vb[idx])[mask]
    return TrendScore(
        model_id="",
        score=float(terms.sum()),
        contributing_frames=int(mask.sum()),
    )


@dataclass
class SelectionResult:
    chosen: str
    scores: list[TrendScore]
    outputs: tuple[Waveform, Waveform]
    outputs_by_model: dict[str, tuple[Waveform, Waveform]] = field(default_factory=dict)
    all_penalized: bool = False


def score_candidate(outputs: tuple[Waveform, Waveform],
                    pitch_config: PitchConfig | None = None,
                    units: str = "hz",
                    segment_seconds: float | None = None) -> TrendScore:
    """Pitch-track a candidate's two output channels and score the trends.

    With ``segment_seconds`` set, each channel is scored in fixed-length
    frame blocks and the blocks' scores summed (the mask never bridges a
    block boundary); a block where either channel is fully unvoiced
    penalizes the whole candidate.
    """
    cfg = pitch_config or PitchConfig()
    ta = track_pitch(outputs[0], cfg)
    tb = track_pitch(outputs[1], cfg)
    if units == "semitones":
        ta, tb = to_semitones(ta), to_semitones(tb)
    elif units != "hz":
        raise ValueError(f"unknown pitch units {units!r}")

    if segment_seconds is None:
        return trend_distance(ta, tb)

    frames_per_block = max(3, int(round(segment_seconds / cfg.hop_seconds)))
    total = 0.0
    contributing = 0
    for start in range(0, len(ta), frames_per_block):
        block_a = PitchTrack(ta.pitches_hz[start:start + frames_per_block],
                             ta.hop_seconds, ta.fmin_hz, ta.fmax_hz)
        block_b = PitchTrack(tb.pitches_hz[start:start + frames_per_block],
                             tb.hop_seconds, tb.fmin_hz, tb.fmax_hz)
        if len(block_a) < 3:
            break
        part = trend_distance(block_a, block_b)
        if part.penalized:
            return TrendScore(model_id="", score=PENALTY_SCORE, penalized=True)
        total += part.score
        contributing += part.contributing_frames
    return TrendScore(model_id="", score=total, contributing_frames=contributing)


def select_model(mixed_vocal: Waveform,
                 candidates: list[CandidateModel],
                 pitch_config: PitchConfig | None = None,
                 workdir=None,
                 units: str = "hz",
                 segment_seconds: float | None = None,
                 jobs: int | None = None) -> SelectionResult:
    """Run every stage-2 candidate and keep the one with the closest trends.

    Candidates run concurrently (up to ``jobs`` workers; backend temp files
    are namespaced per invocation) and results are assembled in candidate
    order, so completion order never changes the outcome. Failed backends
    are excluded (recorded with an error message) rather than fatal;
    BackendFailureError is raised only when no candidate succeeds. Ties
    break toward the lexicographically smaller model_id. If every
    surviving candidate is penalized, the argmin is still returned with
    ``all_penalized`` set.
    """
    if not candidates:
        raise BackendFailureError("no stage-2 candidates to select from")

    def run_one(cand: CandidateModel):
        try:
            pair = run_backend(cand.backend, mixed_vocal, workdir=workdir)
        except (BackendFailureError, ContractViolationError) as exc:
            log.warning("candidate %s failed: %s", cand.model_id, exc)
            return TrendScore(model_id=cand.model_id, score=PENALTY_SCORE,
                              penalized=True, error=str(exc)), None
        result = score_candidate(pair, pitch_config, units=units,
                                 segment_seconds=segment_seconds)
        result.model_id = cand.model_id
        return result, pair

    max_workers = jobs or min(len(candidates), os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        outcomes = list(pool.map(run_one, candidates))

    scores = [score for score, _ in outcomes]
    outputs = {score.model_id: pair for score, pair in outcomes
               if pair is not None}

    if not outputs:
        raise BackendFailureError(
            "every candidate backend failed: "
            + "; ".join(f"{s.model_id}: {s.error}" for s in scores))

    runnable = [s for s in scores if s.model_id in outputs]
    best = min(runnable, key=lambda s: (s.score, s.model_id))
    all_penalized = all(s.penalized for s in runnable)
    if all_penalized:
        log.warning("all candidates penalized; returning argmin %s", best.model_id)
    return SelectionResult(
        chosen=best.model_id,
        scores=scores,
        outputs=outputs[best.model_id],
        outputs_by_model=outputs,
        all_penalized=all_penalized,
    )
