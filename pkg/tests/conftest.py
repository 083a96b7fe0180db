import json

import numpy as np
import pytest

from singersep import audio, backends, synth


@pytest.fixture
def tmp_wav(tmp_path):
    """Write a waveform to a temp file and return its path."""

    counter = {"n": 0}

    def _write(w, name=None):
        counter["n"] += 1
        path = tmp_path / (name or f"wav{counter['n']:03d}.wav")
        audio.write_wav(w, path)
        return path

    return _write


def make_duet_refs(tmp_path, seed, seconds=10.0, carrier_a=200.0, carrier_b=310.0):
    """Two vibrato 'singers' sharing one vibrato contour (parallel trends)."""
    rng = np.random.default_rng(seed)
    phase = rng.uniform(0, 2 * np.pi)
    depth = rng.uniform(2.0, 4.0)
    ref_a = synth.vibrato_sine(carrier_a, seconds, depth_hz=depth, vibrato_phase=phase)
    ref_b = synth.vibrato_sine(carrier_b, seconds, depth_hz=depth, vibrato_phase=phase)
    pa = tmp_path / f"ref_a_{seed}.wav"
    pb = tmp_path / f"ref_b_{seed}.wav"
    audio.write_wav(ref_a, pa)
    audio.write_wav(ref_b, pb)
    return (ref_a, pa), (ref_b, pb)


def oracle_candidate(model_id, ref_a_path, ref_b_path, **kwargs):
    return backends.CandidateModel(model_id, backends.SeparationBackend(
        kind=backends.KIND_ORACLE, stage=backends.STAGE2,
        oracle=backends.OracleSpec(str(ref_a_path), str(ref_b_path), **kwargs)))


def write_registry(path, entries):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(entries, fh, indent=2)
    return path


def write_toy_stems(tmp_path, n_singers=4, songs_per_singer=1, seconds=30.0,
                    split=None):
    """Synthesize a toy stem corpus and its manifest; returns manifest path."""
    stems_dir = tmp_path / "stems"
    stems_dir.mkdir(exist_ok=True)
    rows = []
    for s in range(n_singers):
        for k in range(songs_per_singer):
            carrier = 180.0 + 35.0 * s + 7.0 * k
            w = synth.vibrato_sine(carrier, seconds, depth_hz=3.0,
                                   vibrato_phase=0.7 * s)
            path = stems_dir / f"singer{s}_song{k}.wav"
            audio.write_wav(w, path)
            row = {"song_id": f"song-{s}-{k}", "singer_id": f"singer-{s}",
                   "vocal_path": str(path)}
            if split is not None:
                row["split"] = split
            rows.append(row)
    manifest = tmp_path / "stems.json"
    with open(manifest, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2)
    return manifest
