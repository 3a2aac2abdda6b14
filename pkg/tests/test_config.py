"""Config schema: strict parsing, key paths, seeds, hashing, round trips."""

import hashlib

import pytest

from onebit_mimo.config import (
    ChanestExperiment,
    CollisionExperiment,
    ConfigError,
    MulticellExperiment,
    ParsedConfig,
    SerExperiment,
    config_hash,
    config_to_dict,
    derive_seed,
    experiment_to_dict,
    parse_config,
    parse_config_data,
)


def _ser_entry(**overrides):
    entry = {
        "name": "qpsk_sweep",
        "type": "ser_sweep",
        "k": 2,
        "n_r": 8,
        "constellation": {"kind": "psk", "order": 4},
        "snr_grid_db": [0, 5, 10],
        "detectors": ["NML1", "ZF"],
        "trials_per_point": 100,
    }
    entry.update(overrides)
    return entry


def _full_config():
    return {
        "master_seed": 42,
        "experiments": [
            _ser_entry(),
            {
                "name": "training",
                "type": "chanest_sweep",
                "k": 4,
                "t": 20,
                "snr_grid_db": [0, 20],
                "estimators": ["ML", "ZF"],
                "draws_per_point": 50,
            },
            {
                "name": "collision",
                "type": "collision_check",
                "k": 2,
                "n_r": 2,
                "p": 1.0,
                "sigma2": 1.0,
                "trials": 1000,
            },
            {
                "name": "cells",
                "type": "multicell_sweep",
                "d_grid_m": [150, 300],
                "detectors": ["NML1", "ZF"],
                "trials": 20,
                "n_cells": 3,
                "k": 2,
                "n_r": 4,
            },
        ],
    }


class TestParsing:
    def test_all_experiment_types(self):
        parsed = parse_config_data(_full_config())
        assert parsed.master_seed == 42
        kinds = [type(e) for e in parsed.experiments]
        assert kinds == [
            SerExperiment, ChanestExperiment, CollisionExperiment,
            MulticellExperiment,
        ]
        ser = parsed.experiments[0]
        assert ser.config.snr_grid_db == (0.0, 5.0, 10.0)
        assert ser.config.detectors == ("NML1", "ZF")
        mc = parsed.experiments[3]
        assert mc.config.n_cells == 3
        assert mc.d_grid_m == (150.0, 300.0)

    def test_yaml_file_round_trip(self, tmp_path):
        path = tmp_path / "conf.yaml"
        path.write_text(
            "master_seed: 9\n"
            "experiments:\n"
            "  - name: small\n"
            "    type: collision_check\n"
            "    k: 1\n"
            "    n_r: 1\n"
            "    p: 1.0\n"
            "    sigma2: 1.0\n"
            "    trials: 10\n"
        )
        parsed = parse_config(str(path))
        assert parsed.master_seed == 9
        assert parsed.experiments[0].name == "small"

    def test_invalid_yaml_reported(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("master_seed: [unclosed\n")
        with pytest.raises(ConfigError, match="not valid YAML"):
            parse_config(str(path))

    def test_empty_experiments_allowed(self):
        parsed = parse_config_data({"master_seed": 1})
        assert parsed.experiments == ()


class TestStrictness:
    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match=r"<root>\.workers"):
            parse_config_data({"master_seed": 1, "workers": 4})

    def test_unknown_experiment_key_with_path(self):
        cfg = {"master_seed": 1,
               "experiments": [_ser_entry(snr_step=5)]}
        with pytest.raises(ConfigError, match=r"experiments\[0\]\.snr_step"):
            parse_config_data(cfg)

    def test_nested_key_path(self):
        entry = _ser_entry()
        entry["constellation"] = {"kind": "psk", "order": 4, "scale": 2}
        with pytest.raises(
            ConfigError,
            match=r"experiments\[0\]\.constellation\.scale",
        ):
            parse_config_data({"master_seed": 1, "experiments": [entry]})

    def test_type_errors_name_the_key(self):
        with pytest.raises(ConfigError, match=r"experiments\[0\]\.k"):
            parse_config_data(
                {"master_seed": 1, "experiments": [_ser_entry(k="two")]}
            )
        # booleans are not integers here, whatever YAML thinks
        with pytest.raises(ConfigError, match=r"experiments\[0\]\.k"):
            parse_config_data(
                {"master_seed": 1, "experiments": [_ser_entry(k=True)]}
            )

    def test_bad_list_element_indexed(self):
        with pytest.raises(
            ConfigError, match=r"experiments\[0\]\.snr_grid_db\[1\]"
        ):
            parse_config_data(
                {
                    "master_seed": 1,
                    "experiments": [_ser_entry(snr_grid_db=[0, "x"])],
                }
            )

    def test_duplicate_names_rejected(self):
        cfg = {
            "master_seed": 1,
            "experiments": [_ser_entry(), _ser_entry()],
        }
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_data(cfg)

    def test_bad_name_rejected(self):
        with pytest.raises(ConfigError, match=r"\.name"):
            parse_config_data(
                {"master_seed": 1,
                 "experiments": [_ser_entry(name="has space")]}
            )

    def test_unknown_type_rejected(self):
        with pytest.raises(ConfigError, match=r"\.type"):
            parse_config_data(
                {"master_seed": 1,
                 "experiments": [_ser_entry(type="ber_sweep")]}
            )

    def test_domain_errors_carry_path(self):
        with pytest.raises(ConfigError, match=r"experiments\[0\]"):
            parse_config_data(
                {"master_seed": 1,
                 "experiments": [_ser_entry(detectors=["XYZ"])]}
            )
        entry = _ser_entry(
            k=5, constellation={"kind": "qam", "order": 64},
            detectors=["ML"],
        )
        with pytest.raises(ConfigError, match="enumeration cap"):
            parse_config_data({"master_seed": 1, "experiments": [entry]})

    def test_non_mapping_rejected(self):
        with pytest.raises(ConfigError, match="<root>"):
            parse_config_data([1, 2, 3])


class TestSeeds:
    def test_explicit_seed_wins(self):
        cfg = {"master_seed": 1, "experiments": [_ser_entry(seed=777)]}
        parsed = parse_config_data(cfg)
        assert parsed.experiments[0].config.master_seed == 777

    def test_derived_seed_depends_on_name_not_position(self):
        a = parse_config_data(
            {"master_seed": 5, "experiments": [_ser_entry(name="alpha")]}
        )
        b = parse_config_data(
            {
                "master_seed": 5,
                "experiments": [
                    _ser_entry(name="other"), _ser_entry(name="alpha"),
                ],
            }
        )
        assert (
            a.experiments[0].config.master_seed
            == b.experiments[1].config.master_seed
        )

    def test_derivation_formula(self):
        digest = hashlib.sha256(b"5:alpha").digest()
        assert derive_seed(5, "alpha") == int.from_bytes(digest[:8], "big")

    def test_seed_range_checked(self):
        with pytest.raises(ConfigError, match=r"\.seed"):
            parse_config_data(
                {"master_seed": 1, "experiments": [_ser_entry(seed=-3)]}
            )
        with pytest.raises(ConfigError, match="master_seed"):
            parse_config_data({"master_seed": 2**64})


class TestRoundTrip:
    def test_serialize_parse_identity(self):
        parsed = parse_config_data(_full_config())
        again = parse_config_data(config_to_dict(parsed))
        assert isinstance(again, ParsedConfig)
        for e1, e2 in zip(parsed.experiments, again.experiments):
            assert experiment_to_dict(e1) == experiment_to_dict(e2)

    def test_effective_seed_materialized(self):
        parsed = parse_config_data(_full_config())
        d = experiment_to_dict(parsed.experiments[0])
        assert d["seed"] == derive_seed(42, "qpsk_sweep")
        # re-parsing under a different master seed preserves behavior
        again = parse_config_data(
            {"master_seed": 999, "experiments": [d]}
        )
        assert (
            again.experiments[0].config.master_seed
            == parsed.experiments[0].config.master_seed
        )

    def test_hash_stable_and_sensitive(self):
        parsed = parse_config_data(_full_config())
        h1 = config_hash(parsed.experiments[0])
        h2 = config_hash(parse_config_data(_full_config()).experiments[0])
        assert h1 == h2
        assert len(h1) == 12
        changed = parse_config_data(
            {
                "master_seed": 42,
                "experiments": [_ser_entry(trials_per_point=101)],
            }
        )
        assert config_hash(changed.experiments[0]) != h1


class TestManifestInput:
    def test_manifest_parses_with_embedded_seed(self):
        manifest = {
            "artifact_version": 1,
            "master_seed": 42,
            "config": _full_config(),
            "experiments": [{"name": "ignored"}],
        }
        parsed = parse_config_data(manifest)
        direct = parse_config_data(_full_config())
        assert config_to_dict(parsed) == config_to_dict(direct)

    def test_manifest_seed_overrides_inner(self):
        inner = _full_config()
        manifest = {
            "artifact_version": 1,
            "master_seed": 7,
            "config": inner,
        }
        parsed = parse_config_data(manifest)
        assert parsed.master_seed == 7

    def test_explicit_override_beats_manifest(self):
        manifest = {
            "artifact_version": 1,
            "master_seed": 7,
            "config": _full_config(),
        }
        parsed = parse_config_data(manifest, override_seed=123)
        assert parsed.master_seed == 123
