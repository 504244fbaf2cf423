import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from mouseforest.seeding import rng_for
from mouseforest.synth import imageio
from mouseforest.synth.dataset import make_synth_set
from mouseforest.synth.poses import Perturbation, pose_library, sample_poses
from mouseforest.synth.render import (
    BACKGROUND,
    FRONT_LEFT,
    FRONT_RIGHT,
    HEAD,
    REAR_LEFT,
    REAR_RIGHT,
    Camera,
    Capsule,
    RenderError,
    add_noise,
    part_labels,
    render,
    render_depth,
    render_labels,
    render_pair,
)
from mouseforest.synth.skeleton import (
    MAIN_JOINTS,
    N_JOINTS,
    PIVOT_X,
    SPINE_HEIGHT,
    SkeletonPose,
    default_model,
    forward_kinematics,
    mirror_pose,
)

GOLDEN = Path(__file__).parent / "golden"
MODEL = default_model()


def random_poses(count, seed=0, ranges=None):
    return sample_poses(pose_library(MODEL), ranges or Perturbation(), count, seed, MODEL, stream="tests")


# forward kinematics ------------------------------------------------------------


def test_rest_pose_matches_golden_file():
    golden = np.array(json.loads((GOLDEN / "rest_positions.json").read_text())["joints"])
    np.testing.assert_allclose(forward_kinematics(MODEL, SkeletonPose()), golden, atol=1e-9)


def test_rest_pose_is_sum_of_bone_vectors():
    pos = forward_kinematics(MODEL, SkeletonPose())
    root = np.array([-PIVOT_X, 0.0, SPINE_HEIGHT])
    for j in range(1, N_JOINTS + 1):
        want, k = root.copy(), j
        while MODEL.parents[k - 1] != 0:
            want += MODEL.rest[k - 1]
            k = MODEL.parents[k - 1]
        np.testing.assert_allclose(pos[j - 1], want, atol=1e-12)


def test_nose_to_tail_base_is_100mm():
    pos = forward_kinematics(MODEL, SkeletonPose())
    assert np.linalg.norm(pos[0] - pos[5]) == pytest.approx(100.0)


def test_translation_shifts_every_joint():
    for pose in random_poses(5):
        t = np.array([12.5, -3.0, 4.0])
        moved = replace(pose, translation=pose.translation + t)
        np.testing.assert_allclose(forward_kinematics(MODEL, moved) - forward_kinematics(MODEL, pose), np.tile(t, (N_JOINTS, 1)), atol=1e-9)


def test_scale_scales_all_distances():
    for pose in random_poses(5, seed=1):
        a = forward_kinematics(MODEL, pose)
        b = forward_kinematics(MODEL, replace(pose, scale=pose.scale * 1.7))
        da = np.linalg.norm(a[:, None] - a[None], axis=-1)
        db = np.linalg.norm(b[:, None] - b[None], axis=-1)
        np.testing.assert_allclose(db, 1.7 * da, atol=1e-9)


def test_bone_lengths_preserved_by_rotation():
    for pose in random_poses(5, seed=2):
        pos = forward_kinematics(MODEL, pose)
        for p, c in MODEL.bones():
            assert np.linalg.norm(pos[c - 1] - pos[p - 1]) == pytest.approx(MODEL.bone_length(c, pose.scale, pose.bone_scale))


def test_angle_out_of_limits_rejected():
    a = np.zeros((N_JOINTS, 3))
    a[3, 1] = 2.0
    with pytest.raises(ValueError, match="joint 4"):
        forward_kinematics(MODEL, SkeletonPose(angles=a))


def test_fk_is_deterministic():
    pose = random_poses(1, seed=3)[0]
    np.testing.assert_array_equal(forward_kinematics(MODEL, pose), forward_kinematics(MODEL, pose))


# rendering --------------------------------------------------------------------


def test_empty_skeleton_is_background():
    cam = Camera()
    img = render_depth(MODEL, np.zeros((0, 3)), cam)
    assert np.all(img == cam.background)
    depth, winner, _ = render([], cam)
    assert np.all(depth == cam.background) and np.all(winner == -1)


def _line_segment_distance(d, a, b):
    """Distance between the line through the origin along unit d and segment ab."""
    p = a + np.linspace(0.0, 1.0, 4001)[:, None] * (b - a)
    return float(np.min(np.linalg.norm(p - (p @ d)[:, None] * d, axis=1)))


def test_vertical_capsule_against_analytic_oracle():
    cam = Camera(41, 41, focal=400.0)
    h, r = 40.0, 10.0
    cap = Capsule(np.array([0.0, 0.0, 5.0]), np.array([0.0, 0.0, h]), r)
    depth, winner, _ = render([cap], cam)
    c = 20
    # the optical axis meets the top of the upper ball
    assert depth[c, c] == pytest.approx(cam.height - (h + r), abs=1e-9)
    # nearby rays hit the upper ball: closed-form sphere intersection
    origin = np.array([0.0, 0.0, cam.height])
    for row, col in [(20, 22), (18, 21), (23, 20), (16, 20)]:
        rd, per_t = cam.rays(np.array(float(col)), np.array(float(row)))
        oc = origin - cap.b
        b = rd @ oc
        t = -b - math.sqrt(b * b - (oc @ oc - r * r))
        assert depth[row, col] == pytest.approx(t * per_t, abs=1e-9)
    # silhouette: hit iff the ray passes within r of the axis segment
    for row in range(41):
        for col in range(41):
            rd, _ = cam.rays(np.array(float(col)), np.array(float(row)))
            dist = _line_segment_distance(rd, cap.a - origin, cap.b - origin)
            if abs(dist - r) > 0.05:
                assert (winner[row, col] == 0) == (dist < r), (row, col)
    fg = np.argwhere(winner == 0)
    np.testing.assert_allclose(fg.mean(axis=0), [c, c], atol=1e-9)


def test_translation_shifts_foreground_centroid():
    cam = Camera()
    pose = random_poses(1, seed=4)[0]
    moved = replace(pose, translation=pose.translation + np.array([10.0, 0.0, 0.0]))
    d0 = render_pair(MODEL, forward_kinematics(MODEL, pose), cam, pose.scale)[0]
    d1 = render_pair(MODEL, forward_kinematics(MODEL, moved), cam, moved.scale)[0]
    fg0, fg1 = d0 < cam.background, d1 < cam.background
    shift = np.argwhere(fg1)[:, 1].mean() - np.argwhere(fg0)[:, 1].mean()
    # every surface point at distance z moves by focal * 10 / z pixels
    expected = np.mean(cam.focal * 10.0 / d0[fg0])
    assert shift == pytest.approx(expected, abs=0.15)
    assert np.argwhere(fg1)[:, 0].mean() == pytest.approx(np.argwhere(fg0)[:, 0].mean(), abs=0.15)


def test_projection_round_trip():
    cam = Camera.for_size(160, 120)
    pts = np.array([[10.0, -5.0, 20.0], [0.0, 0.0, 0.0], [-30.0, 25.0, 35.0]])
    uv = cam.project(pts)
    back = cam.back_project(uv[:, 0], uv[:, 1], cam.height - pts[:, 2])
    np.testing.assert_allclose(back, pts, atol=1e-9)
    with pytest.raises(RenderError):
        cam.project([[0.0, 0.0, 700.0]])


def test_joint_behind_camera_is_render_error():
    pos = forward_kinematics(MODEL, SkeletonPose())
    pos[:, 2] += 1000.0
    with pytest.raises(RenderError):
        render_pair(MODEL, pos, Camera())


def test_head_only_capsule_is_all_head():
    cam = Camera()
    pos = forward_kinematics(MODEL, SkeletonPose())
    caps = [Capsule(pos[1], pos[0], 7.0, 1)]
    _, winner, hits = render(caps, cam)
    labels = part_labels(pos, caps, winner, hits)
    fg = labels != BACKGROUND
    assert fg.any() and np.all(labels[fg] == HEAD)


def test_label_and_depth_masks_identical():
    cam = Camera()
    for pose in random_poses(100, seed=5):
        pos = forward_kinematics(MODEL, pose)
        depth = render_depth(MODEL, pos, cam, pose.scale)
        labels = render_labels(MODEL, pos, cam, pose.scale)
        np.testing.assert_array_equal(depth < cam.background, labels != BACKGROUND)


def test_mirror_pose_swaps_left_and_right_labels():
    cam = Camera()
    ranges = replace(Perturbation(), translation=0.0)
    for pose in random_poses(10, seed=6, ranges=ranges):
        a = render_labels(MODEL, forward_kinematics(MODEL, pose), cam, pose.scale)
        m = mirror_pose(pose)
        b = render_labels(MODEL, forward_kinematics(MODEL, m), cam, m.scale)
        ca, cb = np.bincount(a.ravel(), minlength=256), np.bincount(b.ravel(), minlength=256)
        assert ca[FRONT_LEFT] == cb[FRONT_RIGHT] and ca[FRONT_RIGHT] == cb[FRONT_LEFT]
        assert ca[REAR_LEFT] == cb[REAR_RIGHT] and ca[REAR_RIGHT] == cb[REAR_LEFT]
        assert ca[HEAD] == cb[HEAD]


def test_main_joints_stay_in_frame():
    for size in [(64, 64), (128, 128), (160, 120)]:
        cam = Camera.for_size(*size)
        for pose in random_poses(300, seed=7):
            uv = cam.project(forward_kinematics(MODEL, pose)[np.array(MAIN_JOINTS) - 1])
            assert np.all((uv >= 0) & (uv <= [cam.width - 1, cam.height_px - 1]))


# noise --------------------------------------------------------------------------


def test_zero_noise_is_identity():
    img = render_depth(MODEL, forward_kinematics(MODEL, SkeletonPose()), Camera())
    np.testing.assert_array_equal(add_noise(img, 0.0, rng_for(0), 600.0), img)
    with pytest.raises(ValueError):
        add_noise(img, -1.0, rng_for(0), 600.0)


def test_noise_std_matches_sigma():
    img = np.full((4, 5), 500.0)
    img[0, 0] = 600.0
    draws = np.stack([add_noise(img, 5.0, rng_for(0, "std", k), 600.0) for k in range(10_000)])
    std = draws[:, 1:, :].std(axis=0)
    assert np.all(np.abs(std - 5.0) < 0.25)
    assert np.all(draws[:, 0, 0] == 600.0)


def test_noise_preserves_mask_and_is_reproducible():
    img = render_depth(MODEL, forward_kinematics(MODEL, SkeletonPose()), Camera())
    a = add_noise(img, 400.0, rng_for(1, "mask"), 600.0)
    b = add_noise(img, 400.0, rng_for(1, "mask"), 600.0)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a < 600.0, img < 600.0)


# pose sampling ------------------------------------------------------------------


def test_library_covers_four_families():
    lib = pose_library(MODEL)
    assert len(lib) >= 20
    for p in lib:
        p.validate(MODEL)


def test_zero_perturbation_returns_base_poses():
    lib = pose_library(MODEL)
    poses = sample_poses(lib, Perturbation.none(), 30, 0, MODEL)
    for p in poses:
        assert any(np.array_equal(p.angles, b.angles) and p.scale == b.scale and np.array_equal(p.translation, b.translation) for b in lib)
        assert np.all(p.global_angles == 0) and np.all(p.bone_scale == 1)


def test_sampling_is_deterministic_and_within_limits():
    a, b = random_poses(50, seed=8), random_poses(50, seed=8)
    for p, q in zip(a, b):
        np.testing.assert_array_equal(p.angles, q.angles)
        np.testing.assert_array_equal(p.global_angles, q.global_angles)
        p.validate(MODEL)
    with pytest.raises(ValueError):
        sample_poses([], Perturbation(), 1, 0)


# files ------------------------------------------------------------------------


def test_image_files_round_trip(tmp_path):
    s = make_synth_set(2, 0, "files", Camera())
    s.save(tmp_path)
    depth = imageio.load_depth(tmp_path / "img000001.depth")
    np.testing.assert_allclose(depth, s.depth[1], atol=0.05 + 1e-9)
    np.testing.assert_array_equal(imageio.load_labels(tmp_path / "img000001.labels"), s.labels[1])
    side = imageio.load_sidecar(tmp_path / "img000001.json")
    np.testing.assert_allclose(side["joints"], s.joints[1])
    assert side["camera"]["focal"] == s.camera.focal
    raw = (tmp_path / "img000000.depth").read_bytes()
    assert raw[:4] == b"MFDI"


def test_bad_image_files(tmp_path):
    (tmp_path / "x.depth").write_bytes(b"MF")
    with pytest.raises(imageio.ImageFormatError, match="truncated"):
        imageio.load_depth(tmp_path / "x.depth")
    imageio.save_labels(tmp_path / "l.labels", np.zeros((3, 3), dtype=np.uint8))
    with pytest.raises(imageio.ImageFormatError, match="magic"):
        imageio.load_depth(tmp_path / "l.labels")
    with pytest.raises(imageio.ImageFormatError):
        imageio.save_depth(tmp_path / "big.depth", np.full((2, 2), 1e7))
