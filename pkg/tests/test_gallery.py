"""Dataset ingestion, image decoding, and the enrollment store."""

from __future__ import annotations

import json

import numpy as np
import pytest
from PIL import Image

from biofuse.eigenspace import train
from biofuse.gallery import (
    EnrollmentStore,
    ModalityTemplates,
    enroll,
    load_store,
    load_subject_samples,
    save_store,
    scan_dataset,
)
from biofuse.images import (
    ImageSample,
    Modality,
    bilinear_resize,
    load_image,
    luminance,
    make_sample,
    write_pgm,
)


class TestPgmDecoding:
    def test_byte_oracle(self, pgm_file):
        """Bytes {0, 255, 128, 64} map to the exact rationals v/255."""
        path = pgm_file("t.pgm", 2, 2, [0, 255, 128, 64])
        sample = load_image(path, 2, 2, Modality.FACE)
        expected = np.array([[0.0, 1.0], [128.0 / 255.0, 64.0 / 255.0]])
        assert np.array_equal(sample.pixels, expected)

    def test_every_byte_value_is_exact(self, tmp_path):
        data = bytes(range(256))
        path = tmp_path / "all.pgm"
        path.write_bytes(b"P5\n16 16\n255\n" + data)
        sample = load_image(path, 16, 16, Modality.EAR)
        expected = np.arange(256, dtype=np.float64).reshape(16, 16) / 255.0
        assert np.array_equal(sample.pixels, expected)

    def test_header_comments_and_whitespace(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5 # comment\n# another line\n 2\t1 \n255\n" + bytes([7, 9]))
        sample = load_image(path, 2, 1, Modality.FACE)
        assert np.array_equal(sample.pixels, np.array([[7.0, 9.0]]) / 255.0)

    def test_wrong_magic(self, pgm_file):
        path = pgm_file("p2.pgm", 1, 1, [0], magic=b"P2")
        with pytest.raises(ValueError, match="unsupported image format"):
            load_image(path, 1, 1, Modality.FACE)

    def test_sixteen_bit_rejected(self, pgm_file):
        path = pgm_file("deep.pgm", 1, 1, [0, 0], maxval=65535)
        with pytest.raises(ValueError, match="maxval 255"):
            load_image(path, 1, 1, Modality.FACE)

    def test_truncated_pixels(self, tmp_path):
        path = tmp_path / "short.pgm"
        path.write_bytes(b"P5\n2 2\n255\n\x00\x01")
        with pytest.raises(ValueError, match="truncated PGM pixel data"):
            load_image(path, 2, 2, Modality.FACE)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "header.pgm"
        path.write_bytes(b"P5\n2")
        with pytest.raises(ValueError, match="truncated PGM header"):
            load_image(path, 2, 2, Modality.FACE)

    def test_write_read_round_trip(self, tmp_path, rng):
        values = rng.integers(0, 256, size=(5, 7), dtype=np.uint8)
        path = tmp_path / "rt.pgm"
        write_pgm(path, values)
        sample = load_image(path, 7, 5, Modality.FACE)
        assert np.array_equal(sample.pixels, values.astype(np.float64) / 255.0)


class TestPngDecoding:
    def test_grayscale_png_is_exact(self, tmp_path, rng):
        values = rng.integers(0, 256, size=(4, 6), dtype=np.uint8)
        path = tmp_path / "g.png"
        Image.fromarray(values, mode="L").save(path)
        sample = load_image(path, 6, 4, Modality.FACE)
        assert np.array_equal(sample.pixels, values.astype(np.float64) / 255.0)

    def test_gray_rgb_png_reduces_to_value(self, tmp_path):
        """R=G=B=v collapses to v/255 because the luma weights sum to 1."""
        values = np.full((3, 3, 3), 77, dtype=np.uint8)
        path = tmp_path / "rgb.png"
        Image.fromarray(values, mode="RGB").save(path)
        sample = load_image(path, 3, 3, Modality.FACE)
        np.testing.assert_allclose(sample.pixels, 77.0 / 255.0, atol=1e-12)

    def test_color_png_uses_luma_weights(self, tmp_path):
        rgb = np.zeros((1, 3, 3), dtype=np.uint8)
        rgb[0, 0] = (255, 0, 0)
        rgb[0, 1] = (0, 255, 0)
        rgb[0, 2] = (0, 0, 255)
        path = tmp_path / "c.png"
        Image.fromarray(rgb, mode="RGB").save(path)
        sample = load_image(path, 3, 1, Modality.FACE)
        np.testing.assert_allclose(sample.pixels, [[0.299, 0.587, 0.114]], atol=1e-12)

    def test_unknown_format_rejected(self, tmp_path):
        path = tmp_path / "x.bin"
        path.write_bytes(b"GIF89a not really")
        with pytest.raises(ValueError, match="unsupported image format"):
            load_image(path, 1, 1, Modality.FACE)


class TestResize:
    def test_same_size_is_unresampled(self, pgm_file):
        path = pgm_file("id.pgm", 2, 2, [0, 255, 128, 64])
        sample = load_image(path, 2, 2, Modality.FACE)
        expected = np.array([[0, 255], [128, 64]], dtype=np.float64) / 255.0
        assert np.array_equal(sample.pixels, expected)

    def test_constant_image_stays_constant(self, rng):
        value = 0.3125
        pixels = np.full((3, 5), value)
        for w, h in ((10, 7), (2, 2), (5, 3), (1, 1)):
            out = bilinear_resize(pixels, w, h)
            assert out.shape == (h, w)
            np.testing.assert_allclose(out, value, atol=1e-15)

    def test_frozen_upscale(self):
        # Half-pixel centers: src = (i + 0.5)/2 - 0.5 for a 2 -> 4 upscale
        # gives positions [-0.25, 0.25, 0.75, 1.25], clamped at the edges.
        out = bilinear_resize(np.array([[0.0, 1.0]]), 4, 1)
        np.testing.assert_allclose(out, [[0.0, 0.25, 0.75, 1.0]], atol=1e-15)

    def test_frozen_downscale(self):
        # 4 -> 2: positions [0.5, 2.5] average adjacent pairs.
        row = np.array([[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]])
        out = bilinear_resize(row, 2, 1)
        np.testing.assert_allclose(out, [[1.0 / 6.0, 5.0 / 6.0]], atol=1e-15)

    def test_loader_resizes_to_target(self, pgm_file):
        path = pgm_file("r.pgm", 2, 2, [0, 255, 0, 255])
        sample = load_image(path, 4, 4, Modality.EAR)
        assert (sample.width, sample.height) == (4, 4)
        assert 0.0 <= sample.pixels.min() and sample.pixels.max() <= 1.0

    def test_zero_target_rejected(self, pgm_file):
        path = pgm_file("z.pgm", 1, 1, [0])
        with pytest.raises(ValueError, match="target dimensions"):
            load_image(path, 0, 4, Modality.FACE)


class TestSampleValidation:
    def test_luminance_weights(self):
        rgb = np.array([[[1.0, 0.0, 0.0]]])
        assert luminance(rgb)[0, 0] == 0.299

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            make_sample([[1.5]], Modality.FACE)

    def test_non_2d_rejected(self):
        with pytest.raises(ValueError, match="2-D"):
            make_sample([1.0, 0.5], Modality.FACE)

    def test_clamped(self):
        raw = ImageSample(np.array([[-0.5, 1.5]]), Modality.FACE)
        clamped = raw.clamped()
        assert np.array_equal(clamped.pixels, [[0.0, 1.0]])

    def test_write_pgm_requires_uint8(self, tmp_path):
        with pytest.raises(ValueError, match="uint8"):
            write_pgm(tmp_path / "bad.pgm", np.zeros((2, 2)))


class TestScanDataset:
    def fixture_spec(self):
        img = np.zeros((2, 2), dtype=np.uint8)
        return {
            "alice": {"face": [img, img], "ear": [img, img]},
            "bob": {"face": [img, img], "ear": [img, img]},
        }

    def test_matches_directory_walk(self, dataset_tree):
        root = dataset_tree(self.fixture_spec())
        manifest = scan_dataset(root, face_size=(2, 2), ear_size=(2, 2))
        assert [s.subject_id for s in manifest.subjects] == ["alice", "bob"]
        for entry in manifest.subjects:
            walked_face = sorted((root / entry.subject_id / "face").iterdir())
            walked_ear = sorted((root / entry.subject_id / "ear").iterdir())
            assert list(entry.face_paths) == walked_face
            assert list(entry.ear_paths) == walked_ear
            assert not entry.flagged
        assert manifest.warnings == ()

    def test_scan_is_deterministic(self, dataset_tree):
        root = dataset_tree(self.fixture_spec())
        a = scan_dataset(root, face_size=(2, 2), ear_size=(2, 2))
        b = scan_dataset(root, face_size=(2, 2), ear_size=(2, 2))
        assert a == b

    def test_missing_modality_flags_subject(self, dataset_tree):
        spec = self.fixture_spec()
        del spec["bob"]["ear"]
        root = dataset_tree(spec)
        manifest = scan_dataset(root, face_size=(2, 2), ear_size=(2, 2))
        bob = manifest.subject("bob")
        assert bob.flagged
        assert len(bob.face_paths) == 2
        assert bob.ear_paths == ()
        assert any("bob" in w and "ear" in w for w in manifest.warnings)

    def test_empty_root(self, tmp_path):
        root = tmp_path / "empty"
        root.mkdir()
        manifest = scan_dataset(root)
        assert manifest.subjects == ()

    def test_missing_root(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="dataset root"):
            scan_dataset(tmp_path / "nope")

    def test_non_image_files_ignored(self, dataset_tree):
        root = dataset_tree(self.fixture_spec())
        (root / "alice" / "face" / "notes.txt").write_text("not an image")
        manifest = scan_dataset(root, face_size=(2, 2), ear_size=(2, 2))
        assert len(manifest.subject("alice").face_paths) == 2

    def test_unknown_subject_lookup(self, dataset_tree):
        root = dataset_tree(self.fixture_spec())
        manifest = scan_dataset(root, face_size=(2, 2), ear_size=(2, 2))
        with pytest.raises(ValueError, match="unknown subject"):
            manifest.subject("carol")

    def test_load_subject_samples_resizes(self, dataset_tree):
        root = dataset_tree(self.fixture_spec())
        manifest = scan_dataset(root, face_size=(3, 4), ear_size=(2, 2))
        samples = load_subject_samples(
            manifest, manifest.subject("alice"), Modality.FACE
        )
        assert all((s.width, s.height) == (3, 4) for s in samples)
        assert all(s.subject_id == "alice" for s in samples)


class TestEnrollmentStore:
    @pytest.fixture
    def model(self, random_gallery):
        return train(random_gallery(5, 2, 3), variance_fraction=1.0)

    def test_enroll_cardinality(self, model, random_gallery):
        store = EnrollmentStore()
        enroll(store, model, random_gallery(3, 2, 3), "alice")
        assert len(store.templates(Modality.FACE)) == 3
        assert store.subjects() == ["alice"]

    def test_mean_image_enrolls_as_zero_vector(self, model):
        store = EnrollmentStore()
        enroll(store, model, [model.mean_image()], "alice")
        weights = store.templates(Modality.FACE)[0].weights
        assert np.array_equal(weights, np.zeros(model.k))

    def test_mixed_models_rejected(self, model, random_gallery):
        other = train(random_gallery(4, 2, 3), variance_fraction=1.0)
        store = EnrollmentStore()
        enroll(store, model, random_gallery(1, 2, 3), "alice")
        with pytest.raises(ValueError, match="different model"):
            enroll(store, other, random_gallery(1, 2, 3), "bob")

    def test_round_trip_is_exact(self, model, random_gallery, tmp_path):
        store = EnrollmentStore()
        enroll(store, model, random_gallery(3, 2, 3), "alice")
        enroll(store, model, random_gallery(2, 2, 3), "bob")
        path = tmp_path / "store.json"
        save_store(store, path)
        loaded = load_store(path, face_model=model)
        originals = store.templates(Modality.FACE)
        reloaded = loaded.templates(Modality.FACE)
        assert len(reloaded) == len(originals)
        for a, b in zip(originals, reloaded):
            assert np.array_equal(a.weights, b.weights)
            assert a.subject_id == b.subject_id
        assert loaded.subjects() == ["alice", "bob"]

    def test_stale_store_rejected(self, model, random_gallery, tmp_path):
        store = EnrollmentStore()
        enroll(store, model, random_gallery(2, 2, 3), "alice")
        path = tmp_path / "store.json"
        save_store(store, path)
        retrained = train(random_gallery(6, 2, 3), variance_fraction=1.0)
        with pytest.raises(ValueError, match="stale store"):
            load_store(path, face_model=retrained)

    def test_template_length_checked(self, model, tmp_path):
        from biofuse.eigenspace import FeatureVector

        store = EnrollmentStore()
        store.blocks[Modality.FACE] = ModalityTemplates(
            model_hash=model.content_hash(),
            templates=[FeatureVector(np.zeros(model.k + 1), Modality.FACE, "x")],
        )
        path = tmp_path / "store.json"
        save_store(store, path)
        with pytest.raises(ValueError, match="does not match model k"):
            load_store(path, face_model=model)

    def test_format_version_checked(self, model, random_gallery, tmp_path):
        store = EnrollmentStore()
        enroll(store, model, random_gallery(1, 2, 3), "alice")
        path = tmp_path / "store.json"
        save_store(store, path)
        payload = json.loads(path.read_text())
        payload["format_version"] = 0
        path.write_text(json.dumps(payload))
        with pytest.raises(ValueError, match="format_version"):
            load_store(path)

    def test_load_without_models_skips_integrity(self, model, random_gallery, tmp_path):
        store = EnrollmentStore()
        enroll(store, model, random_gallery(2, 2, 3), "alice")
        path = tmp_path / "store.json"
        save_store(store, path)
        loaded = load_store(path)
        assert len(loaded.templates(Modality.FACE)) == 2
