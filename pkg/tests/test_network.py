"""Network model: H matrix, operator derivation, synthetic feeders, file I/O."""

import json

import numpy as np
import pytest

from gridfp.errors import ParseError, SingularMatrix, ValidationError
from gridfp.loadflow import Injection, solve_fixed_point
from gridfp.network import (
    BALANCED_SLACK,
    FeederModel,
    build_h,
    derive_operators,
    generate_synthetic_feeder,
    load_feeder,
    save_feeder,
)

H_BLOCK = np.array([[1, -1, 0], [0, 1, -1], [-1, 0, 1]], dtype=complex)


class TestBuildH:
    def test_single_bus_block(self):
        assert np.array_equal(build_h(1), H_BLOCK)

    def test_row_sums_are_exactly_zero(self):
        for n in (1, 2, 5, 13):
            h = build_h(n)
            assert np.array_equal(h.sum(axis=1), np.zeros(3 * n))

    def test_constant_per_block_vector_maps_to_zero(self):
        rng = np.random.default_rng(3)
        c = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        vec = np.repeat(c, 3)
        assert np.array_equal(build_h(4) @ vec, np.zeros(12))

    def test_block_placement_n2(self):
        h = build_h(2)
        assert h.shape == (6, 6)
        assert h[3, 3] == 1 and h[3, 4] == -1 and h[0, 3] == 0
        assert np.array_equal(h[3:, 3:], H_BLOCK)
        assert np.array_equal(h[:3, 3:], np.zeros((3, 3)))

    def test_rejects_nonpositive_size(self):
        with pytest.raises(ValidationError):
            build_h(0)


class TestDeriveOperators:
    def test_identity_feeder(self):
        f = FeederModel(
            n_buses=2,
            y_ll=np.eye(6, dtype=complex),
            y_l0=np.zeros((6, 3), dtype=complex),
            v_slack=BALANCED_SLACK.copy(),
        )
        op = derive_operators(f)
        assert np.array_equal(op.x, np.eye(6))
        assert np.array_equal(op.w, np.zeros(6))

    def test_no_load_voltage_replicates_slack(self):
        # y_ll = 2I with y_l0 = -2 stacked identities forces w = stacked v_slack
        n = 3
        f = FeederModel(
            n_buses=n,
            y_ll=2.0 * np.eye(3 * n, dtype=complex),
            y_l0=np.tile(-2.0 * np.eye(3, dtype=complex), (n, 1)),
            v_slack=BALANCED_SLACK.copy(),
        )
        op = derive_operators(f)
        assert np.allclose(op.x, 0.5 * np.eye(3 * n), atol=1e-15)
        assert np.allclose(op.w, np.tile(BALANCED_SLACK, n), atol=1e-14)

    def test_inverse_residual_on_synthetic_feeder(self):
        f = generate_synthetic_feeder(4, seed=7)
        op = derive_operators(f)
        assert np.max(np.abs(op.x @ f.y_ll - np.eye(12))) < 1e-10

    def test_w_reproducible_from_feeder(self):
        f = generate_synthetic_feeder(6, seed=2)
        op = derive_operators(f)
        again = -(op.x @ (f.y_l0 @ f.v_slack))
        assert np.max(np.abs(op.w - again)) < 1e-12

    def test_h_field_matches_build_h(self):
        f = generate_synthetic_feeder(2, seed=0)
        op = derive_operators(f)
        assert np.array_equal(op.h, build_h(2))


class TestFeederValidation:
    def test_dimension_mismatch_names_field(self):
        with pytest.raises(ValidationError, match="y_ll"):
            FeederModel(
                n_buses=2,
                y_ll=np.eye(5, dtype=complex),
                y_l0=np.zeros((6, 3), dtype=complex),
                v_slack=BALANCED_SLACK.copy(),
            )

    def test_slack_band_enforced(self):
        with pytest.raises(ValidationError, match="v_slack"):
            FeederModel(
                n_buses=1,
                y_ll=np.eye(3, dtype=complex),
                y_l0=np.zeros((3, 3), dtype=complex),
                v_slack=1.5 * BALANCED_SLACK,
            )

    def test_singular_y_ll_rejected_at_construction(self):
        with pytest.raises(ValidationError):
            FeederModel(
                n_buses=1,
                y_ll=np.zeros((3, 3), dtype=complex),
                y_l0=np.zeros((3, 3), dtype=complex),
                v_slack=BALANCED_SLACK.copy(),
            )

    def test_derive_operators_raises_singular(self):
        f = FeederModel(
            n_buses=1,
            y_ll=np.eye(3, dtype=complex),
            y_l0=np.zeros((3, 3), dtype=complex),
            v_slack=BALANCED_SLACK.copy(),
        )
        # bypass construction-time checks to exercise the inversion guard
        object.__setattr__(f, "y_ll", np.diag([1.0, 1.0, 0.0]).astype(complex))
        with pytest.raises(SingularMatrix):
            derive_operators(f)


class TestSyntheticFeeder:
    def test_deterministic_bitwise(self):
        a = generate_synthetic_feeder(1, seed=0)
        b = generate_synthetic_feeder(1, seed=0)
        assert a.name == b.name
        assert np.array_equal(a.y_ll, b.y_ll)
        assert np.array_equal(a.y_l0, b.y_l0)
        assert np.array_equal(a.v_slack, b.v_slack)

    def test_seed_changes_result(self):
        a = generate_synthetic_feeder(3, seed=1)
        b = generate_synthetic_feeder(3, seed=2)
        assert not np.array_equal(a.y_ll, b.y_ll)

    def test_row_entry_dominance(self):
        f = generate_synthetic_feeder(4, seed=7)
        diag = np.abs(np.diag(f.y_ll))
        off = np.abs(f.y_ll - np.diag(np.diag(f.y_ll)))
        assert np.all(diag * (1 + 1e-12) >= off.max(axis=1))

    def test_nominal_load_converges_within_budget(self):
        f = generate_synthetic_feeder(12, seed=3)
        op = derive_operators(f)
        s = Injection(
            s_wye=np.full(36, -(0.01 + 0.005j), dtype=complex),
            s_delta=np.zeros(36, dtype=complex),
        )
        report = solve_fixed_point(op, s)
        assert report.converged
        assert report.iterations <= 50


class TestFeederFiles:
    def test_round_trip_is_bit_exact(self, tmp_path):
        f = generate_synthetic_feeder(5, seed=9)
        p = tmp_path / "feeder.json"
        save_feeder(f, p)
        g = load_feeder(p)
        assert g.name == f.name and g.n_buses == f.n_buses
        assert np.array_equal(g.y_ll, f.y_ll)
        assert np.array_equal(g.y_l0, f.y_l0)
        assert np.array_equal(g.v_slack, f.v_slack)

    def test_hand_written_single_bus_file(self, tmp_path):
        def pairs(arr):
            arr = np.asarray(arr, dtype=complex)
            return np.stack([arr.real, arr.imag], axis=-1).tolist()

        payload = {
            "name": "tiny",
            "n_buses": 1,
            "v_slack": pairs(BALANCED_SLACK),
            "y_ll": pairs(2.0 * np.eye(3)),
            "y_l0": pairs(np.zeros((3, 3))),
        }
        p = tmp_path / "tiny.json"
        p.write_text(json.dumps(payload))
        op = derive_operators(load_feeder(p))
        assert np.allclose(op.x, 0.5 * np.eye(3), atol=1e-15)

    def test_wrong_y_ll_shape_is_validation_error(self, tmp_path):
        f = generate_synthetic_feeder(2, seed=1)
        save_feeder(f, tmp_path / "f.json")
        payload = json.loads((tmp_path / "f.json").read_text())
        payload["y_ll"] = [row[:-1] for row in payload["y_ll"]]
        (tmp_path / "bad.json").write_text(json.dumps(payload))
        with pytest.raises(ValidationError, match="y_ll"):
            load_feeder(tmp_path / "bad.json")

    def test_malformed_json_is_parse_error(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text("{not json")
        with pytest.raises(ParseError):
            load_feeder(p)

    def test_missing_key_is_parse_error(self, tmp_path):
        p = tmp_path / "partial.json"
        p.write_text(json.dumps({"name": "x", "n_buses": 1}))
        with pytest.raises(ParseError, match="v_slack"):
            load_feeder(p)

    def test_extra_slack_blocks_are_ignored(self, tmp_path):
        f = generate_synthetic_feeder(2, seed=4)
        p = tmp_path / "f.json"
        save_feeder(f, p)
        payload = json.loads(p.read_text())
        payload["y_0l"] = payload["y_l0"]
        payload["y_00"] = [[[1.0, 0.0]] * 3] * 3
        p.write_text(json.dumps(payload))
        g = load_feeder(p)
        assert np.array_equal(g.y_ll, f.y_ll)
