"""Refinement loop tests: half-iteration contract (feasibility, fixed
points, the flat scripted oracle), stopping rules, and determinism."""

import numpy as np
import pytest

from depthpocs.codec import (
    bin_bounds,
    clip_to_bins,
    dct_blocks,
    decode_map,
    encode_map,
    flat_table,
    idct_blocks,
    merge_blocks,
    pad_to_blocks,
    split_blocks,
)
from depthpocs.errors import (
    InvalidConfigurationError,
    InvalidInputError,
    InvalidParameterError,
)
from depthpocs.geometry import simple_camera
from depthpocs.pocs import (
    IterationReport,
    RefineOptions,
    ReportEntry,
    _sanity_bound,
    half_iteration,
    has_converged,
    refine,
)
from depthpocs.scene import Box, Plane, SceneSpec, generate_scene
from depthpocs.warp import bilateral_filter, forward_warp, interpolate_at


def small_scene(width=48, height=48):
    return SceneSpec(
        width=width,
        height=height,
        primitives=[
            Plane(a=0.3, b=-0.1, c=140.0),
            Box(x0=0.0, x1=10.0, y0=-8.0, y1=6.0, depth=70.0),
        ],
        focal=120.0,
        baseline=6.0,
        seed=3,
        noise_amp=1.0,
    )


def coeff_violations(map_, desc, slack=1e-9):
    coeffs = dct_blocks(split_blocks(pad_to_blocks(np.asarray(map_, float))))
    lo, hi = bin_bounds(desc.indices, desc.table)
    return int(np.count_nonzero((coeffs < lo - slack) | (coeffs > hi + slack)))


class TestHalfIteration:
    def test_fixed_point_on_own_decode(self):
        gen = generate_scene(small_scene())
        desc = encode_map(gen.left, flat_table(16.0))
        dec = decode_map(desc)
        cam = gen.cameras.left
        opts = RefineOptions(radius=0)
        out, stats = half_iteration(dec, cam, cam, desc, dec, opts)
        assert stats.clip_fraction == 0.0
        assert np.max(np.abs(out - dec)) < 1e-9

    def test_truth_lies_in_its_own_bins(self):
        gen = generate_scene(small_scene())
        desc = encode_map(gen.left, flat_table(24.0))
        cam = gen.cameras.left
        opts = RefineOptions(radius=0)
        out, stats = half_iteration(gen.left, cam, cam, desc, gen.left, opts)
        assert stats.clip_fraction == 0.0
        assert np.max(np.abs(out - gen.left)) <= 1e-9

    def test_output_always_feasible(self):
        gen = generate_scene(small_scene())
        table = flat_table(24.0)
        desc_r = encode_map(gen.right, table)
        noisy_src = np.clip(
            gen.left + np.random.default_rng(5).normal(0, 6.0, gen.left.shape), 1, 254
        )
        opts = RefineOptions()
        out, stats = half_iteration(
            noisy_src, gen.cameras.left, gen.cameras.right, desc_r, decode_map(desc_r), opts
        )
        assert coeff_violations(out, desc_r) == 0
        assert 0.0 <= stats.clip_fraction <= 1.0
        assert stats.mean_change >= 0.0

    def test_matches_flat_scripted_oracle(self):
        # Recompose the half-iteration out of the public pieces, with the
        # interpolation done pixel by pixel, and require bit equality.
        gen = generate_scene(small_scene())
        table = flat_table(24.0)
        desc_r = encode_map(gen.right, table)
        left0 = decode_map(encode_map(gen.left, table))
        right0 = decode_map(desc_r)
        opts = RefineOptions()

        got, stats = half_iteration(
            left0, gen.cameras.left, gen.cameras.right, desc_r, right0, opts
        )

        buckets = forward_warp(left0, gen.cameras.left, gen.cameras.right)
        h, w = right0.shape
        interp = np.empty_like(right0)
        for r in range(h):
            cands = buckets[r].samples(r)
            for c in range(w):
                interp[r, c] = interpolate_at(r, c, cands, right0[r, c], opts.tau)
        smooth = bilateral_filter(interp, opts.sigma_s, opts.sigma_r, opts.radius)
        padded = pad_to_blocks(smooth)
        coeffs = dct_blocks(split_blocks(padded))
        bounds = bin_bounds(desc_r.indices, desc_r.table)
        n_out = int(np.count_nonzero((coeffs < bounds.lo) | (coeffs > bounds.hi)))
        rebuilt = merge_blocks(
            idct_blocks(clip_to_bins(coeffs, bounds)), desc_r.height, desc_r.width
        )
        want = rebuilt[: desc_r.orig_height, : desc_r.orig_width]

        assert np.array_equal(got, want)
        assert stats.mean_change == float(np.mean(np.abs(want - right0)))
        assert stats.clip_fraction == n_out / coeffs.size

    def test_shape_mismatch_rejected(self):
        gen = generate_scene(small_scene())
        desc = encode_map(gen.right, flat_table(16.0))
        cam_l, cam_r = gen.cameras.left, gen.cameras.right
        with pytest.raises(InvalidInputError):
            half_iteration(gen.left[:-8], cam_l, cam_r, desc, gen.right[:-8], RefineOptions())


class TestRefine:
    def test_huge_eps_single_iteration(self):
        gen = generate_scene(small_scene())
        table = flat_table(16.0)
        dl, dr = encode_map(gen.left, table), encode_map(gen.right, table)
        opts = RefineOptions(eps=1e9)
        _, _, report = refine(dl, dr, gen.cameras.left, gen.cameras.right, opts)
        assert report.iterations == 1
        assert report.converged
        assert len(report.entries) == 2

    def test_constant_scene_is_fixed_point(self):
        const = np.full((32, 32), 128.0)
        table = flat_table(16.0)
        dl, dr = encode_map(const, table), encode_map(const, table)
        cam = simple_camera(100.0, 15.5, 15.5)
        left, right, report = refine(dl, dr, cam, cam, RefineOptions())
        std = decode_map(dl)
        assert report.converged
        assert report.iterations == 1
        assert np.max(np.abs(left - std)) < 1e-9
        assert np.max(np.abs(right - std)) < 1e-9
        assert report.entries[0].mean_change < 1e-9

    def test_outputs_clamped_and_feasibility_traced(self):
        gen = generate_scene(small_scene())
        table = flat_table(24.0)
        dl, dr = encode_map(gen.left, table), encode_map(gen.right, table)
        left, right, report = refine(dl, dr, gen.cameras.left, gen.cameras.right)
        assert np.all(left >= 0.0) and np.all(left <= 255.0)
        assert np.all(right >= 0.0) and np.all(right <= 255.0)
        assert len(report.entries) == 2 * report.iterations
        for e in report.entries:
            assert 0.0 <= e.clip_fraction <= 1.0
            assert e.mean_change >= 0.0
            assert e.psnr_left is None  # no ground truth supplied

    def test_trace_recorded_with_truth(self):
        gen = generate_scene(small_scene())
        table = flat_table(24.0)
        dl, dr = encode_map(gen.left, table), encode_map(gen.right, table)
        opts = RefineOptions(max_iters=3)
        _, _, report = refine(
            dl, dr, gen.cameras.left, gen.cameras.right, opts, (gen.left, gen.right)
        )
        for e in report.entries:
            assert e.psnr_left is not None and e.psnr_right is not None
            assert e.g == pytest.approx((e.psnr_left + e.psnr_right) / 2.0)

    def test_keep_best_tracks_peak(self):
        gen = generate_scene(small_scene())
        table = flat_table(24.0)
        dl, dr = encode_map(gen.left, table), encode_map(gen.right, table)
        opts = RefineOptions(max_iters=4, keep_best=True)
        _, _, report = refine(
            dl, dr, gen.cameras.left, gen.cameras.right, opts, (gen.left, gen.right)
        )
        assert report.best_g == max(e.g for e in report.entries)
        assert report.best_left is not None and report.best_right is not None
        assert 1 <= report.best_index <= len(report.entries)

    def test_start_order_flag(self):
        gen = generate_scene(small_scene())
        table = flat_table(24.0)
        dl, dr = encode_map(gen.left, table), encode_map(gen.right, table)
        _, _, rep_l = refine(dl, dr, gen.cameras.left, gen.cameras.right, RefineOptions(max_iters=1))
        _, _, rep_r = refine(
            dl, dr, gen.cameras.left, gen.cameras.right, RefineOptions(max_iters=1, start="right")
        )
        assert [e.view for e in rep_l.entries] == ["right", "left"]
        assert [e.view for e in rep_r.entries] == ["left", "right"]

    def test_deterministic(self):
        gen = generate_scene(small_scene())
        table = flat_table(24.0)
        dl, dr = encode_map(gen.left, table), encode_map(gen.right, table)
        opts = RefineOptions(max_iters=3)
        l1, r1, _ = refine(dl, dr, gen.cameras.left, gen.cameras.right, opts)
        l2, r2, _ = refine(dl, dr, gen.cameras.left, gen.cameras.right, opts)
        assert np.array_equal(l1, l2) and np.array_equal(r1, r2)

    def test_non_rectified_rejected(self):
        const = np.full((16, 16), 100.0)
        table = flat_table(16.0)
        dl, dr = encode_map(const, table), encode_map(const, table)
        a = simple_camera(100.0, 8.0, 8.0, 0.0)
        b = simple_camera(130.0, 8.0, 8.0, 5.0)
        with pytest.raises(InvalidConfigurationError):
            refine(dl, dr, a, b)

    def test_option_validation(self):
        with pytest.raises(InvalidParameterError):
            RefineOptions(max_iters=0)
        with pytest.raises(InvalidParameterError):
            RefineOptions(eps=-1.0)
        with pytest.raises(InvalidParameterError):
            RefineOptions(start="middle")

    def test_runaway_values_detected(self):
        from depthpocs.errors import NumericalError

        maps = [np.full((4, 4), 120.0), np.full((4, 4), 400.0)]
        with pytest.raises(NumericalError):
            _sanity_bound(maps, -96.0, 255.0 + 96.0, "test")
        _sanity_bound([np.full((4, 4), -50.0)], -96.0, 255.0 + 96.0, "test")


class TestHasConverged:
    def _report(self, *changes):
        rep = IterationReport()
        for i, ch in enumerate(changes):
            rep.entries.append(ReportEntry(1 + i // 2, "right" if i % 2 == 0 else "left", ch, 0.0))
        return rep

    def test_both_below(self):
        assert has_converged(self._report(0.0, 0.0), RefineOptions(eps=0.01))

    def test_one_above(self):
        assert not has_converged(self._report(0.5, 0.001), RefineOptions(eps=0.01))

    def test_zero_eps_nonzero_change(self):
        assert not has_converged(self._report(1e-9, 1e-12), RefineOptions(eps=0.0))

    def test_only_last_iteration_counts(self):
        rep = self._report(5.0, 5.0, 0.001, 0.002)
        assert has_converged(rep, RefineOptions(eps=0.01))

    def test_empty_report_rejected(self):
        with pytest.raises(InvalidInputError):
            has_converged(IterationReport(), RefineOptions())
