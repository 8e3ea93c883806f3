"""Acceptance suite: one test per release criterion, one printed line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the pass lines.
"""

import time
from itertools import islice

import numpy as np

from flowsynth import (
    BinaryMask,
    DepthMap,
    Manifest,
    MotionField,
    RngStream,
    SampleRecord,
    SynthParams,
    baseline_segment,
    boundary_f,
    build_real_manifest,
    build_synthetic_manifest,
    compute_stats,
    draw_params,
    f_beta,
    g_mean,
    merge_manifests,
    mixed_sampler,
    normalize_flow,
    read_flo,
    region_j,
    reverse_depth,
    scale_motion,
    shift_motion,
    synthesize_motion,
    uv_to_rgb,
    write_flo,
    write_mask,
    write_pfm,
    write_png_rgb,
)
from flowsynth.cli import main

from conftest import make_synthetic_tree, make_video_tree, random_field, random_mask_bits
from oracles import (
    boundary_f_reference,
    f_beta_reference,
    region_j_reference,
    render_reference,
    synthesize_motion_reference,
    write_flo_reference,
)
from test_dataset import tree_digest

TOL = 1e-6


def announce(n, text):
    print(f"ACCEPTANCE {n} PASS: {text}")


def random_normalized_depth(rng, h=8, w=8):
    vals = rng.random((h, w)).astype(np.float32)
    vals.flat[0] = 0.0
    vals.flat[-1] = 1.0
    return DepthMap(vals, state="normalized")


def test_acceptance_1_stage_range_invariants():
    started = time.monotonic()
    rng = np.random.default_rng(1001)
    degenerate = 0
    for i in range(1000):
        depth = random_normalized_depth(rng)
        params = draw_params(RngStream(2024, f"acc1-{i}"))
        for r, s, alpha in (
            (params.r_x, params.s_x, params.alpha_x),
            (params.r_y, params.s_y, params.alpha_y),
        ):
            m1 = reverse_depth(depth, r)
            assert np.abs(m1).max() <= 1.0 + TOL
            m2 = shift_motion(m1, s)
            assert np.abs(m2).max() <= 2.0 + TOL
            m3 = scale_motion(m2, alpha)
            assert np.abs(m3).max() <= 2.0 + TOL
        field = synthesize_motion(depth, params)
        normalized, flat = normalize_flow(field)
        if flat:
            degenerate += 1
            assert normalized.peak == 0.0
        else:
            assert abs(normalized.peak - 1.0) <= TOL
    elapsed = time.monotonic() - started
    assert elapsed < 10.0, f"range sweep took {elapsed:.1f}s"
    announce(1, f"stage ranges hold over 1000 draws ({elapsed:.2f}s, {degenerate} degenerate)")


def test_acceptance_2_synthesis_oracle_equivalence():
    rng = np.random.default_rng(1002)
    for i in range(100):
        depth = random_normalized_depth(rng, 16, 16)
        params = draw_params(RngStream(77, f"acc2-{i}"))
        field = synthesize_motion(depth, params)
        ref_u, ref_v = synthesize_motion_reference(depth.values, params)
        np.testing.assert_allclose(field.u, ref_u, atol=TOL)
        np.testing.assert_allclose(field.v, ref_v, atol=TOL)
    announce(2, "synthesized motion matches the straight-line reference on 100 fields")


def test_acceptance_3_color_wheel_oracle_equivalence():
    rng = np.random.default_rng(1003)
    for _ in range(20):
        raw = random_field(rng, 32, 32, scale=2.0, stage="raw")
        field, degenerate = normalize_flow(raw)
        assert not degenerate
        ours = uv_to_rgb(field).rgb
        ref = render_reference(field.u, field.v)
        assert np.array_equal(ours, ref)
    special = MotionField(
        u=np.array([[0.0, 1.0]], dtype=np.float32),
        v=np.array([[0.0, 0.0]], dtype=np.float32),
        stage="normalized",
    )
    rgb = uv_to_rgb(special).rgb
    assert tuple(rgb[0, 0]) == (255, 255, 255)
    assert tuple(rgb[0, 1]) == (255, 0, 0)
    announce(3, "renders are pixel-exact against the scalar wheel reference on 20 fields")


def _table1_real_manifest():
    # 30 sequences totalling 2,079 frames (9 sequences of 70, 21 of 69)
    records = []
    for s in range(30):
        n = 70 if s < 9 else 69
        for f in range(n):
            records.append(
                SampleRecord(
                    sample_id=f"real/seq{s:03d}/{f:05d}",
                    image=f"seq{s:03d}/frames/{f:05d}.png",
                    flow_flo=f"seq{s:03d}/flows/{f:05d}.flo",
                    mask=f"seq{s:03d}/masks/{f:05d}.png",
                    source="real",
                    context_id=f"real/seq{s:03d}",
                )
            )
    assert len(records) == 2079
    return Manifest(records=tuple(records))


def _table1_synth_manifest():
    params = SynthParams(r_x=0, s_x=0.0, alpha_x=0.5, r_y=0, s_y=0.0, alpha_y=0.5, sample_seed=1)
    records = tuple(
        SampleRecord(
            sample_id=f"synth/img{i:05d}",
            image=f"images/img{i:05d}.png",
            depth=f"depths/img{i:05d}.pfm",
            flow_flo=f"flows/img{i:05d}.flo",
            mask=f"masks/img{i:05d}.png",
            source="synthetic",
            context_id=f"synth/img{i:05d}",
            params=params,
        )
        for i in range(15572)
    )
    return Manifest(records=records)


def test_acceptance_4_dataset_bookkeeping(tmp_path):
    real = _table1_real_manifest()
    synth = _table1_synth_manifest()
    real_stats = compute_stats(real)
    synth_stats = compute_stats(synth)
    mixed_stats = compute_stats(merge_manifests(real, synth))
    assert (real_stats.n_triplets, real_stats.n_contexts) == (2079, 30)
    assert (synth_stats.n_triplets, synth_stats.n_contexts) == (15572, 15572)
    assert (mixed_stats.n_triplets, mixed_stats.n_contexts) == (17651, 15602)

    # desk-scale variant exercising the real file-tree builders
    video_root = make_video_tree(tmp_path / "videos", {"walk": 5, "swim": 5}, seed=41)
    real_small = build_real_manifest(video_root)
    make_synthetic_tree(tmp_path / "src", 12, size=(10, 12), seed=42)
    run = build_synthetic_manifest(
        tmp_path / "src/images", tmp_path / "src/depths", tmp_path / "src/masks",
        tmp_path / "out", global_seed=3, workers=1,
    )
    rs = compute_stats(real_small)
    ss = compute_stats(run.manifest)
    ms = compute_stats(merge_manifests(real_small, run.manifest))
    assert (rs.n_triplets, rs.n_contexts) == (10, 2)
    assert (ss.n_triplets, ss.n_contexts) == (12, 12)
    assert (ms.n_triplets, ms.n_contexts) == (22, 14)
    announce(4, "triplet/context bookkeeping reproduces the published counts exactly")


def test_acceptance_5_flo_round_trip(tmp_path):
    rng = np.random.default_rng(1005)
    for i in range(100):
        h = int(rng.integers(1, 16))
        w = int(rng.integers(1, 16))
        field = random_field(rng, h, w, scale=100.0)
        path = tmp_path / f"rt{i}.flo"
        write_flo(field, path)
        back = read_flo(path)
        assert back.u.tobytes() == field.u.tobytes()
        assert back.v.tobytes() == field.v.tobytes()
    # cross-check against a byte-level writer assembled from the format spec
    field = random_field(rng, 7, 9, scale=10.0)
    ours = tmp_path / "ours.flo"
    theirs = tmp_path / "theirs.flo"
    write_flo(field, ours)
    write_flo_reference(field.u, field.v, theirs)
    assert ours.read_bytes() == theirs.read_bytes()
    back = read_flo(theirs)
    assert np.array_equal(back.u, field.u) and np.array_equal(back.v, field.v)
    announce(5, "flow files round-trip bit-exactly and match the independent writer")


def test_acceptance_6_metrics_oracle_equivalence():
    rng = np.random.default_rng(1006)
    for i in range(200):
        h = int(rng.integers(2, 25))
        w = int(rng.integers(2, 25))
        pred_bits = random_mask_bits(rng, h, w)
        gt_bits = random_mask_bits(rng, h, w)
        pred_mask = BinaryMask(pred_bits)
        gt_mask = BinaryMask(gt_bits)
        assert region_j(pred_mask, gt_mask) == region_j_reference(pred_bits, gt_bits)
        assert boundary_f(pred_mask, gt_mask) == boundary_f_reference(pred_bits, gt_bits)
        saliency = rng.integers(0, 256, (h, w)).astype(np.float32) / 255.0
        assert f_beta(saliency, gt_mask) == f_beta_reference(saliency, gt_bits)
    assert abs(g_mean(0.880, 0.890) * 100 - 88.5) <= 0.05
    announce(6, "J, boundary F and max-F match brute-force references on 200 pairs")


def test_acceptance_7_mixing_sampler_windows():
    real = Manifest(
        records=tuple(
            SampleRecord(
                sample_id=f"real/s/{i:03d}",
                image=f"s/frames/{i:03d}.png",
                flow_flo=f"s/flows/{i:03d}.flo",
                mask=f"s/masks/{i:03d}.png",
                source="real",
                context_id="real/s",
            )
            for i in range(7)
        )
    )
    params = SynthParams(r_x=0, s_x=0.0, alpha_x=0.5, r_y=0, s_y=0.0, alpha_y=0.5, sample_seed=1)
    synth = Manifest(
        records=tuple(
            SampleRecord(
                sample_id=f"synth/{i:03d}",
                image=f"images/{i:03d}.png",
                depth=f"depths/{i:03d}.pfm",
                flow_flo=f"flows/{i:03d}.flo",
                mask=f"masks/{i:03d}.png",
                source="synthetic",
                context_id=f"synth/{i:03d}",
                params=params,
            )
            for i in range(23)
        )
    )
    for epoch_seed in range(10):
        stream = mixed_sampler(real, synth, ratio=(1, 3), epoch_seed=epoch_seed)
        sources = [rec.source == "real" for rec in islice(stream, 97)]
        for start in range(len(sources) - 3):
            assert sum(sources[start : start + 4]) == 1, f"seed {epoch_seed}, offset {start}"
    announce(7, "every window of 4 in the 1:3 stream holds exactly 1 real sample (10 seeds)")


def test_acceptance_8_synthesize_determinism(tmp_path):
    make_synthetic_tree(tmp_path / "src", 50, size=(20, 26), seed=88)
    digests = {}
    for name, workers in (("run_a", 2), ("run_b", 2), ("run_c", 1)):
        out = tmp_path / name
        code = main(
            [
                "synthesize",
                "--images", str(tmp_path / "src/images"),
                "--depths", str(tmp_path / "src/depths"),
                "--masks", str(tmp_path / "src/masks"),
                "--out", str(out),
                "--seed", "31415",
                "--workers", str(workers),
                "--quiet",
            ]
        )
        assert code == 0
        digests[name] = tree_digest(out)
    assert digests["run_a"] == digests["run_b"], "same-seed reruns differ"
    assert digests["run_a"] == digests["run_c"], "worker count changed the output"
    announce(8, "50-image synthesize runs are byte-identical across reruns and worker counts")


def test_acceptance_9_end_to_end_smoke(tmp_path):
    started = time.monotonic()
    h = w = 24
    bits = np.zeros((h, w), dtype=np.uint8)
    bits[7:17, 8:18] = 1
    blob = BinaryMask(bits)
    depth_vals = np.where(bits == 1, 8.0, 2.0).astype(np.float32)
    src = tmp_path / "src"
    for part in ("images", "depths", "masks"):
        (src / part).mkdir(parents=True)
    rng = np.random.default_rng(9)
    write_png_rgb(rng.integers(0, 256, (h, w, 3)).astype(np.uint8), src / "images/smoke0000.png")
    write_pfm(depth_vals, src / "depths/smoke0000.pfm")
    write_mask(blob, src / "masks/smoke0000.png")

    run = build_synthetic_manifest(
        src / "images", src / "depths", src / "masks", tmp_path / "out",
        global_seed=10, alpha_min=0.2, workers=1,
    )
    assert len(run.manifest) == 1
    rec = run.manifest.records[0]
    field = read_flo(tmp_path / "out" / rec.flow_flo)
    segmented = baseline_segment(field)
    j = region_j(segmented, blob)
    elapsed = time.monotonic() - started
    assert j > 0.9, f"smoke J too low: {j}"
    assert elapsed < 30.0, f"smoke run took {elapsed:.1f}s"
    announce(9, f"bimodal-depth smoke pass: J={j:.3f} in {elapsed:.2f}s")
