"""Shared fixtures: sample builders, fixture image files, dataset trees."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from biofuse.images import ImageSample, Modality


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def face():
    """Build a face sample from a nested-list or array of intensities."""

    def build(pixels, subject_id=None):
        return ImageSample(np.asarray(pixels, dtype=np.float64), Modality.FACE, subject_id)

    return build


@pytest.fixture
def ear():
    """Build an ear sample from a nested-list or array of intensities."""

    def build(pixels, subject_id=None):
        return ImageSample(np.asarray(pixels, dtype=np.float64), Modality.EAR, subject_id)

    return build


@pytest.fixture
def random_gallery(rng):
    """Random same-sized gallery for one modality."""

    def build(m, h, w, modality=Modality.FACE, subject_id=None):
        return [
            ImageSample(rng.random((h, w)), modality, subject_id) for _ in range(m)
        ]

    return build


@pytest.fixture
def pgm_file(tmp_path):
    """Write raw PGM bytes and return the path."""

    def build(name, width, height, data, maxval=255, magic=b"P5"):
        path = tmp_path / name
        header = magic + f"\n{width} {height}\n{maxval}\n".encode("ascii")
        path.write_bytes(header + bytes(data))
        return path

    return build


@pytest.fixture
def dataset_tree(tmp_path):
    """Build root/<subject>/<modality>/NN.pgm from uint8 arrays.

    `spec` maps subject_id -> {"face": [array, ...], "ear": [array, ...]}.
    Missing modality keys are simply not created (flagged-subject cases).
    """

    def build(spec, name="data"):
        root = tmp_path / name
        for subject_id, modalities in spec.items():
            for modality_name, arrays in modalities.items():
                directory = root / subject_id / modality_name
                directory.mkdir(parents=True)
                for i, arr in enumerate(arrays):
                    arr = np.asarray(arr, dtype=np.uint8)
                    h, w = arr.shape
                    header = f"P5\n{w} {h}\n255\n".encode("ascii")
                    (directory / f"{i + 1:02d}.pgm").write_bytes(header + arr.tobytes())
        root.mkdir(exist_ok=True)
        return root

    return build


def subject_blobs(rng, n_subjects, per_subject, h, w, spread=0.01):
    """uint8 capture stacks: far-apart subjects, tight within-subject noise."""
    spec = {}
    for s in range(n_subjects):
        base = rng.uniform(0.2, 0.8, size=(h, w))
        captures = []
        for _ in range(per_subject):
            noisy = np.clip(base + rng.normal(0.0, spread, size=(h, w)), 0.0, 1.0)
            captures.append(np.round(noisy * 255.0).astype(np.uint8))
        spec[f"s{s + 1:02d}"] = captures
    return spec
