import json

from engine_config import EngineSettings, load_settings


def write_settings(tmp_path, payload):
    path = tmp_path / "settings.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def test_defaults_without_file(tmp_path, monkeypatch):
    monkeypatch.delenv("INVAR_DIMENSION", raising=False)
    settings = load_settings(str(tmp_path / "missing.json"), use_dotenv=False)
    assert settings == EngineSettings()
    assert settings.oracle_seeds == [11, 23, 37]


def test_file_then_environment(tmp_path, monkeypatch):
    path = write_settings(tmp_path, {"engine": {"dimension": 5, "workers": 3, "colour": "blue"}})
    monkeypatch.setenv("INVAR_DIMENSION", "3")
    monkeypatch.setenv("INVAR_ORACLE_SEEDS", "1, 2,3")
    settings = load_settings(path, use_dotenv=False)
    assert settings.dimension == 3
    assert settings.workers == 3
    assert settings.oracle_seeds == [1, 2, 3]
    assert not hasattr(settings, "colour")


def test_invalid_values_fall_back(tmp_path, monkeypatch):
    path = write_settings(tmp_path, {"engine": {"mode": "lazy", "signature": 2}})
    monkeypatch.setenv("INVAR_WORKERS", "many")
    settings = load_settings(path, use_dotenv=False)
    assert settings.workers == 1
    assert settings.mode == "nonexpanded"
    assert settings.signature == -1


def test_unreadable_file_is_ignored(tmp_path):
    path = tmp_path / "settings.json"
    path.write_text("{not json", encoding="utf-8")
    assert load_settings(str(path), use_dotenv=False).max_slots == 24
