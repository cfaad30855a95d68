#!/usr/bin/env python3
"""
Run configuration tests
Environment defaults, config files, overrides and validation errors
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import json
from math import pi

import pytest

from api.utils.config import deep_merge, environment_defaults, load_config, read_config_file
from api.utils.errors import ConfigError


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for key in ("QKZ_SEED", "QKZ_WORKERS", "QKZ_TOL"):
        monkeypatch.delenv(key, raising=False)


def write_config(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(data if isinstance(data, str) else json.dumps(data), encoding="utf-8")
    return str(path)


def test_defaults():
    config = load_config()
    assert config.selected_suites()[0] == "barnes"
    assert config.seed == 42
    assert config.mu_value() == 1j * pi
    assert config.format == "json"


def test_environment_defaults(monkeypatch):
    monkeypatch.setenv("QKZ_SEED", "7")
    monkeypatch.setenv("QKZ_TOL", "1e-8")
    assert environment_defaults() == {"seed": 7, "quadrature": {"tol": 1e-8}}
    config = load_config()
    assert config.seed == 7
    assert config.quadrature.tol == 1e-8
    assert config.quadrature.max_depth == 14


def test_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("QKZ_SEED", "7")
    path = write_config(tmp_path, {"seed": 11, "suite": "detm", "quadrature": {"max_depth": 9}})
    config = load_config(path, overrides={"seed": 13, "workers": None})
    assert config.seed == 13
    assert config.suites == ["detm"]
    assert config.quadrature.max_depth == 9
    assert config.workers == 1


def test_deep_merge_keeps_sibling_keys():
    merged = deep_merge({"quadrature": {"tol": 1e-9, "max_depth": 5}}, {"quadrature": {"tol": 1e-6}})
    assert merged == {"quadrature": {"tol": 1e-6, "max_depth": 5}}


def test_parse_error_points_at_line_and_column(tmp_path):
    path = write_config(tmp_path, '{\n  "seed": 3,\n  "suites": [,]\n}')
    with pytest.raises(ConfigError) as err:
        read_config_file(path)
    assert str(err.value).startswith(f"{path}:3:")


def test_config_must_be_an_object(tmp_path):
    with pytest.raises(ConfigError):
        read_config_file(write_config(tmp_path, "[1, 2]"))


def test_missing_file():
    with pytest.raises(ConfigError):
        read_config_file("/nonexistent/run.json")


@pytest.mark.parametrize("data,field", [
    ({"suites": ["nonsense"]}, "suites"),
    ({"format": "yaml"}, "format"),
    ({"mu": {"re": 0.0, "im": 7.0}}, "mu"),
    ({"workers": 0}, "workers"),
])
def test_invalid_fields_are_named(data, field):
    with pytest.raises(ConfigError) as err:
        load_config(data=data)
    assert err.value.field == field


def test_level_zero_requires_p_equal_two_hbar():
    assert load_config(data={"hbar": 0.5, "p": 1.0}).p == 1.0
    with pytest.raises(ConfigError):
        load_config(data={"hbar": 0.5, "p": 2.0})
    with pytest.raises(ConfigError):
        load_config(data={"hbar": 0.0})


def test_explicit_z_sets_n():
    config = load_config(data={"z": {"explicit": [{"re": 0.1}, {"re": -0.2, "im": 0.05}]}})
    assert config.n_values == [2]


def test_explicit_z_must_match_n():
    with pytest.raises(ConfigError) as err:
        load_config(data={"n_values": [3], "z": {"explicit": [{"re": 0.1}, {"re": -0.2}]}})
    assert err.value.field == "z.explicit"


def test_non_generic_z_is_rejected():
    # z_1 - z_2 = -hbar
    with pytest.raises(ConfigError) as err:
        load_config(data={"z": {"explicit": [{"re": 0.1}, {"re": 1.1}]}})
    assert err.value.field == "z.explicit"


def main():
    """Run the configuration tests that need no fixtures"""
    print("🧪 Starting configuration tests...\n")

    tests = [
        ("Deep Merge", test_deep_merge_keeps_sibling_keys),
        ("Missing File", test_missing_file),
        ("Level Zero", test_level_zero_requires_p_equal_two_hbar),
        ("Explicit z", test_explicit_z_sets_n),
        ("Explicit z Arity", test_explicit_z_must_match_n),
        ("Genericity", test_non_generic_z_is_rejected),
    ]

    results = {}
    for test_name, test_func in tests:
        try:
            test_func()
            results[test_name] = True
        except Exception as e:
            print(f"❌ {test_name} failed: {e}")
            results[test_name] = False

    passed = sum(results.values())
    for test_name, result in results.items():
        print(f"{test_name}: {'✅ PASSED' if result else '❌ FAILED'}")
    print(f"\n📊 Overall: {passed}/{len(results)} tests passed")
    return 0 if passed == len(results) else 1


if __name__ == "__main__":
    sys.exit(main())
