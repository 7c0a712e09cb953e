"""Noise models, affine warps, training-set assembly, centering, RNG streams."""

import numpy as np
import pytest

from oidkit import GaussianBlurOperator, GridGeometry, IdentityOperator, PsfParams
from oidkit.seeding import STREAMS, sample_rng, stream_rng
from oidkit.simulate import (
    NoiseSpec,
    TrainingSet,
    add_gaussian_noise,
    add_impulse_noise,
    apply_affine,
    blobs_prototype,
    center,
    centering_from,
    generate_training_set,
    random_affine,
    smooth_prototype,
    uncenter,
)


# ------------------------------------------------------------------ noise

def test_gaussian_noise_zero_level_is_identity():
    y = np.arange(6, dtype=float)
    out = add_gaussian_noise(y, 0.0, np.random.default_rng(0))
    assert np.array_equal(out, y)


@pytest.mark.parametrize("eta", [0.01, 0.1, 0.5, 2.0])
def test_gaussian_noise_hits_nominal_level_exactly(eta):
    y = np.random.default_rng(1).standard_normal(200) + 3.0
    b = add_gaussian_noise(y, eta, np.random.default_rng(2))
    realized = np.linalg.norm(b - y) / np.linalg.norm(y)
    assert abs(realized - eta) <= 1e-12


def test_gaussian_noise_reproducible_for_fixed_seed():
    y = np.ones(4)
    b1 = add_gaussian_noise(y, 0.1, np.random.default_rng(42))
    b2 = add_gaussian_noise(y, 0.1, np.random.default_rng(42))
    assert np.array_equal(b1, b2)
    assert not np.array_equal(b1, y)


def test_impulse_noise_zero_level_is_identity():
    y = np.linspace(-1, 1, 9)
    out = add_impulse_noise(y, 0.0, np.random.default_rng(3))
    assert np.array_equal(out, y)


def test_impulse_noise_corruption_fraction_concentrates():
    y = np.random.default_rng(0).standard_normal(1_000_000)
    b = add_impulse_noise(y, 0.3, np.random.default_rng(100))
    frac = np.mean(b != y)
    assert 0.299 <= frac <= 0.301


def test_impulse_replacements_stay_in_data_range():
    y = np.random.default_rng(4).uniform(-2.0, 5.0, size=1000)
    b = add_impulse_noise(y, 0.8, np.random.default_rng(5))
    assert np.all(b >= y.min()) and np.all(b <= y.max())


def test_impulse_noise_rejects_bad_level():
    with pytest.raises(ValueError):
        add_impulse_noise(np.ones(3), 1.5, np.random.default_rng(0))


def test_noise_spec_validation():
    with pytest.raises(ValueError, match="kind"):
        NoiseSpec("salt")
    with pytest.raises(ValueError, match="lo <= hi"):
        NoiseSpec("gaussian", (0.5, 0.1))
    with pytest.raises(ValueError):
        NoiseSpec("impulse", 1.2)
    lo, hi = NoiseSpec("gaussian", 0.3).eta_range
    assert lo == hi == 0.3


# ----------------------------------------------------------------- affine

def test_affine_identity_parameters_change_nothing():
    img = smooth_prototype(GridGeometry(16, 16), np.random.default_rng(6))
    assert np.array_equal(apply_affine(img), img)


def test_affine_preserves_shape():
    img = blobs_prototype(GridGeometry(20, 12), np.random.default_rng(7))
    out = random_affine(img, np.random.default_rng(8))
    assert out.shape == img.shape


def test_affine_rotation_round_trip_on_interior():
    img = smooth_prototype(GridGeometry(32, 32), np.random.default_rng(3))
    back = apply_affine(apply_affine(img, rotation_deg=10.0), rotation_deg=-10.0)
    inner = (slice(5, -5), slice(5, -5))
    rel = np.linalg.norm(back[inner] - img[inner]) / np.linalg.norm(img[inner])
    assert rel <= 5e-2


def test_affine_validates_inputs():
    with pytest.raises(ValueError, match="2-D"):
        apply_affine(np.ones(5))
    with pytest.raises(ValueError, match="scale"):
        apply_affine(np.ones((3, 3)), scale=0.0)


# ----------------------------------------------------------- training set

def make_set(seed=0, noise=NoiseSpec("gaussian", (0.1, 0.5)), transforms=3):
    geom = GridGeometry(8, 8)
    op = GaussianBlurOperator(geom, PsfParams(1.0, 1.0))
    rng = np.random.default_rng(9)
    protos = [smooth_prototype(geom, rng), blobs_prototype(geom, rng)]
    return generate_training_set(protos, transforms, op, op, noise, seed)


def test_sample_count_is_prototypes_times_transforms():
    ts = make_set()
    assert ts.n_samples == 6
    assert ts.x_true.shape == (6, 64) and ts.b.shape == (6, 64)


def test_gaussian_samples_realize_levels_within_configured_range():
    ts = make_set()
    for j in range(ts.n_samples):
        y = ts.op_generate.apply(ts.x_true[j])
        realized = np.linalg.norm(ts.b[j] - y) / np.linalg.norm(y)
        assert 0.1 <= realized <= 0.5
        assert realized == pytest.approx(ts.etas[j], rel=1e-12)


def test_same_seed_reproduces_training_set_bitwise():
    a, b = make_set(seed=5), make_set(seed=5)
    assert np.array_equal(a.x_true, b.x_true)
    assert np.array_equal(a.b, b.b)
    assert np.array_equal(a.etas, b.etas)
    c = make_set(seed=6)
    assert not np.array_equal(a.b, c.b)


def test_generate_validates_inputs():
    geom = GridGeometry(4, 4)
    op = IdentityOperator(geom.n)
    with pytest.raises(ValueError, match="prototype"):
        generate_training_set([], 2, op, op, NoiseSpec("none"), 0)
    with pytest.raises(ValueError, match="transforms"):
        generate_training_set([np.ones((4, 4))], 0, op, op, NoiseSpec("none"), 0)


def test_training_set_shape_validation():
    op = IdentityOperator(4)
    with pytest.raises(ValueError, match="2-D"):
        TrainingSet(np.ones(4), np.ones((1, 4)), op)
    with pytest.raises(ValueError, match="number of samples"):
        TrainingSet(np.ones((2, 4)), np.ones((3, 4)), op)
    with pytest.raises(ValueError, match="inversion operator"):
        TrainingSet(np.ones((2, 5)), np.ones((2, 4)), op)


# -------------------------------------------------------------- centering

def test_centering_identical_samples_zero_targets():
    op = IdentityOperator(6)
    x = np.tile(np.arange(6.0), (4, 1))
    ts = center(TrainingSet(x, x.copy(), op))
    assert np.allclose(ts.x_true - ts.x_mean, 0.0)
    assert np.allclose(ts.b - ts.b_mean, 0.0)


def test_centering_single_sample_zero_target():
    op = IdentityOperator(3)
    ts = center(TrainingSet(np.array([[1.0, 2.0, 3.0]]), np.ones((1, 3)), op))
    assert np.allclose(ts.x_true[0] - ts.x_mean, 0.0)


def test_uncenter_round_trip_is_exact():
    ts = center(make_set())
    back = uncenter(ts)
    assert back.x_mean is None and back.b_mean is None
    assert np.array_equal(back.x_true, ts.x_true)
    assert np.array_equal(back.b, ts.b)


def test_centering_statistics_copy_to_validation_split():
    train = center(make_set(seed=1))
    val = make_set(seed=2)
    val = centering_from(val, train)
    assert np.array_equal(val.x_mean, train.x_mean)
    assert np.array_equal(val.b_mean, train.b_mean)
    assert val.centered


def test_b_mean_is_inversion_operator_applied_to_x_mean():
    ts = center(make_set())
    assert np.allclose(ts.b_mean, ts.op_invert.apply(ts.x_mean))


# ------------------------------------------------------------ rng streams

def test_streams_are_reproducible_and_distinct():
    a = stream_rng(7, "data").standard_normal(5)
    b = stream_rng(7, "data").standard_normal(5)
    c = stream_rng(7, "surrogate").standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sample_streams_independent_of_index_order():
    draws = {j: sample_rng(3, "data", j).standard_normal(4) for j in (2, 0, 1)}
    again = {j: sample_rng(3, "data", j).standard_normal(4) for j in (0, 1, 2)}
    for j in range(3):
        assert np.array_equal(draws[j], again[j])
    assert not np.array_equal(draws[0], draws[1])


def test_unknown_stream_name_rejected():
    with pytest.raises(ValueError, match="unknown stream"):
        stream_rng(0, "nope")
    with pytest.raises(ValueError, match="unknown stream"):
        sample_rng(0, "nope", 1)
    assert set(STREAMS) >= {"data", "validation", "surrogate"}
