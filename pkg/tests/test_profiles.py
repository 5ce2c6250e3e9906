import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfvp.profiles import (
    Dimensions,
    IdxFormatError,
    ProfileError,
    VarianceProfile,
    build_mixture_profile,
    class_variance_vectors,
    constant_profile,
    load_idx_pair,
    normalize_row_stochastic,
    parse_idx_images,
    parse_idx_labels,
    read_profile_csv,
    synthetic_class_vectors,
    write_profile_csv,
)


def two_pass_variance(values):
    # scalar oracle: population variance in two passes
    mean = sum(values) / len(values)
    return sum((v - mean) ** 2 for v in values) / len(values)


class TestMixture:
    def test_two_class_stacking(self):
        prof = build_mixture_profile([np.array([1.0, 3.0]), np.array([4.0, 4.0])], [2, 2])
        assert prof.entries.tolist() == [[1, 3], [1, 3], [4, 4], [4, 4]]
        assert prof.structure is not None

    def test_single_cell(self):
        prof = build_mixture_profile([np.array([2.0])], [1])
        assert prof.entries.tolist() == [[2.0]]

    def test_ingested_digit_variances_match_scalar_oracle(self):
        rng = np.random.default_rng(42)
        K, per_class, h, w = 10, 30, 4, 5
        images = rng.integers(0, 256, size=(K * per_class, h, w)).astype(np.uint8)
        labels = np.repeat(np.arange(K), per_class).astype(np.uint8)
        vectors = class_variance_vectors(images, labels)
        prof = build_mixture_profile(vectors, [per_class] * K)
        assert prof.rows == K * per_class and prof.cols == h * w
        flat = images.reshape(len(labels), -1)
        for k in (0, 3, 9):
            for j in (0, 7, h * w - 1):
                expected = two_pass_variance(
                    [float(v) for v in flat[labels == k][:, j]]
                )
                assert prof.entries[k * per_class, j] == pytest.approx(expected, rel=1e-12)
        # block structure: all rows within one class identical
        block = prof.entries[:per_class]
        assert np.all(block == block[0])

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ProfileError):
            build_mixture_profile([np.ones(3), np.ones(4)], [1, 1])

    def test_empty_class_list_rejected(self):
        with pytest.raises(ProfileError):
            build_mixture_profile([], [])

    def test_distinct_vectors_give_distinct_rows(self):
        vecs = synthetic_class_vectors(5, 12, seed=1)
        prof = build_mixture_profile(vecs, [3] * 5)
        assert len({tuple(row) for row in prof.entries}) == 5

    def test_materialization_idempotent(self):
        prof = build_mixture_profile(synthetic_class_vectors(3, 9, seed=2), [2, 2, 2])
        a = prof.structure.materialize()
        b = prof.structure.materialize()
        assert a.tobytes() == b.tobytes()


class TestNormalize:
    def test_hand_example(self):
        prof = VarianceProfile(np.array([[1.0, 3.0], [4.0, 4.0]]))
        out = normalize_row_stochastic(prof, 1.0)
        assert out.entries.tolist() == [[0.5, 1.5], [1.0, 1.0]]

    def test_fixed_point_on_row_stochastic_input(self):
        prof = constant_profile(4, 6, 1.0)
        out = normalize_row_stochastic(prof, 1.0)
        assert np.array_equal(out.entries, prof.entries)

    def test_random_profile_row_means(self):
        rng = np.random.default_rng(0)
        prof = VarianceProfile(rng.uniform(0.1, 2.0, size=(5, 7)))
        out = normalize_row_stochastic(prof, 1.0)
        assert np.max(np.abs(out.row_means() - 1.0)) < 1e-12

    @given(
        st.integers(2, 6),
        st.integers(2, 8),
        st.floats(0.25, 4.0),
        st.integers(0, 10_000),
    )
    @settings(max_examples=40, deadline=None)
    def test_projection_property(self, rows, cols, target, seed):
        rng = np.random.default_rng(seed)
        prof = VarianceProfile(rng.uniform(0.05, 3.0, size=(rows, cols)))
        once = normalize_row_stochastic(prof, target)
        twice = normalize_row_stochastic(once, target)
        np.testing.assert_allclose(twice.entries, once.entries, rtol=1e-15)

    def test_class_structure_rescaled_consistently(self):
        prof = build_mixture_profile([np.array([1.0, 3.0]), np.array([2.0, 6.0])], [2, 3])
        out = normalize_row_stochastic(prof, 1.0)
        assert out.structure is not None
        np.testing.assert_array_equal(out.structure.materialize(), out.entries)

    def test_zero_row_rejected(self):
        prof = VarianceProfile(np.array([[0.0, 0.0], [1.0, 1.0]]))
        with pytest.raises(ProfileError):
            normalize_row_stochastic(prof, 1.0)


def idx_image_bytes(images):
    images = np.asarray(images, dtype=np.uint8)
    count, h, w = images.shape
    return struct.pack(">iiii", 0x00000803, count, h, w) + images.tobytes()


def idx_label_bytes(labels):
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">ii", 0x00000801, labels.shape[0]) + labels.tobytes()


class TestIdx:
    def test_two_image_round_trip(self):
        imgs = np.arange(8, dtype=np.uint8).reshape(2, 2, 2)
        out = parse_idx_images(idx_image_bytes(imgs))
        assert out.shape == (2, 2, 2)
        np.testing.assert_array_equal(out, imgs)

    def test_zero_image_file(self):
        data = struct.pack(">iiii", 0x00000803, 0, 28, 28)
        out = parse_idx_images(data)
        assert out.shape == (0, 28, 28)

    def test_labels(self):
        out = parse_idx_labels(idx_label_bytes([7, 0, 9]))
        assert out.tolist() == [7, 0, 9]

    def test_wrong_magic(self):
        data = struct.pack(">iiii", 0x00000801, 1, 2, 2) + bytes(4)
        with pytest.raises(IdxFormatError):
            parse_idx_images(data)
        with pytest.raises(IdxFormatError):
            parse_idx_labels(idx_image_bytes(np.zeros((1, 2, 2), dtype=np.uint8)))

    def test_truncated_payload(self):
        data = struct.pack(">iiii", 0x00000803, 2, 2, 2) + bytes(7)
        with pytest.raises(IdxFormatError):
            parse_idx_images(data)

    def test_pair_count_mismatch(self):
        imgs = idx_image_bytes(np.zeros((2, 2, 2), dtype=np.uint8))
        labels = idx_label_bytes([1, 2, 3])
        with pytest.raises(IdxFormatError):
            load_idx_pair(imgs, labels)


class TestClassVariances:
    def test_identical_images_zero_variance(self):
        imgs = np.full((3, 2, 2), 9, dtype=np.uint8)
        labels = np.zeros(3, dtype=np.uint8)
        (vec,) = class_variance_vectors(imgs, labels)
        assert np.all(vec == 0.0)

    def test_two_point_variance(self):
        imgs = np.zeros((2, 1, 1), dtype=np.uint8)
        imgs[1, 0, 0] = 2
        (vec,) = class_variance_vectors(imgs, np.zeros(2, dtype=np.uint8))
        assert vec[0] == pytest.approx(1.0)

    def test_uniform_bytes_variance(self):
        rng = np.random.default_rng(7)
        imgs = rng.integers(0, 256, size=(100, 10, 10)).astype(np.uint8)
        labels = np.zeros(100, dtype=np.uint8)
        (vec,) = class_variance_vectors(imgs, labels)
        expected = (256**2 - 1) / 12.0
        assert abs(vec.mean() - expected) / expected < 0.05

    def test_underfilled_class_warns_and_zeroes(self):
        imgs = np.ones((3, 2, 2), dtype=np.uint8)
        labels = np.array([0, 0, 1], dtype=np.uint8)
        with pytest.warns(RuntimeWarning):
            vecs = class_variance_vectors(imgs, labels)
        assert np.all(vecs[1] == 0.0)

    def test_label_out_of_range(self):
        imgs = np.ones((2, 2, 2), dtype=np.uint8)
        with pytest.raises(ProfileError):
            class_variance_vectors(imgs, np.array([0, 5], dtype=np.uint8), num_classes=2)

    def test_rescale_applied(self):
        imgs = np.zeros((2, 1, 1), dtype=np.uint8)
        imgs[1, 0, 0] = 2
        (vec,) = class_variance_vectors(imgs, np.zeros(2, dtype=np.uint8), rescale=3.0)
        assert vec[0] == pytest.approx(3.0)


class TestCsv:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        prof = VarianceProfile(rng.uniform(0, 5, size=(4, 6)))
        path = tmp_path / "prof.csv"
        write_profile_csv(prof, path)
        back = read_profile_csv(path)
        assert back.entries.tobytes() == prof.entries.tobytes()
        header = path.read_text().splitlines()[0]
        assert header == "# rows=4 cols=6"

    def test_header_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# rows=2 cols=2\n1.0,2.0\n")
        with pytest.raises(ProfileError):
            read_profile_csv(path)


class TestDimensions:
    def test_derived_quantities(self):
        d = Dimensions(n=300, m=150, p=784, n_test=100)
        assert d.N == 300 + 150 + 2 * 784
        assert d.phi_p == pytest.approx(300 / 784)
        assert d.phi_m == pytest.approx(2.0)
        assert d.c_tilde == pytest.approx(1 / 3)
        assert d.c_n == pytest.approx(np.sqrt(d.N / 300))
        assert d.c_p == pytest.approx(np.sqrt(d.N / 784))
        assert d.c_m == pytest.approx(np.sqrt(d.N / 150))

    def test_counts_validated(self):
        with pytest.raises(ProfileError):
            Dimensions(0, 1, 1, 1)

    def test_entries_read_only(self):
        prof = constant_profile(2, 2)
        with pytest.raises(ValueError):
            prof.entries[0, 0] = 5.0
