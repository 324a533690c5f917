"""Tests for the YAML settings file."""

import pytest
import yaml

from avrkit.core.config import CONFIG_FILENAME, AvrConfig
from avrkit.core.draq import SamplerMode
from avrkit.core.errors import ConfigError


def test_missing_default_file_gives_defaults(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = AvrConfig.load()
    assert cfg == AvrConfig()
    assert cfg.path is None


def test_missing_explicit_file_is_an_error(tmp_path):
    with pytest.raises(ConfigError, match='does not exist'):
        AvrConfig.load(tmp_path / 'nope.yml')


def test_save_and_load(tmp_path):
    path = tmp_path / 'conf' / CONFIG_FILENAME
    AvrConfig(topk=5, threshold=0.4, sampler_mode='persistent').save(path)
    assert not path.with_suffix('.tmp').exists()

    loaded = AvrConfig.load(path)
    assert loaded.topk == 5
    assert loaded.threshold == 0.4
    assert loaded.path == path
    assert loaded.path_config().mode is SamplerMode.PERSISTENT


def test_partial_settings_keep_defaults(tmp_path):
    path = tmp_path / CONFIG_FILENAME
    path.write_text(yaml.safe_dump({'settings': {'num_paths': 20}}), encoding='utf-8')
    cfg = AvrConfig.load(path)
    assert cfg.num_paths == 20
    assert cfg.topk == AvrConfig().topk


@pytest.mark.parametrize('content, message', [
    ('settings:\n  topk: 0\n', "'topk'"),
    ('settings:\n  rerank: random\n', "'rerank'"),
    ('settings:\n  context: maybe\n', "'context'"),
    ('settings:\n  colour: red\n', "Unknown setting 'colour'"),
    ('settings: [1, 2]\n', "'settings' mapping"),
    ('settings: {topk: [\n', 'Cannot parse'),
])
def test_invalid_files(tmp_path, content, message):
    path = tmp_path / CONFIG_FILENAME
    path.write_text(content, encoding='utf-8')
    with pytest.raises(ConfigError, match=message):
        AvrConfig.load(path)


def test_update_ignores_none():
    cfg = AvrConfig(topk=4)
    updated = cfg.update(topk=None, seed=9)
    assert updated.topk == 4
    assert updated.seed == 9
    assert cfg.seed == 0
    with pytest.raises(ConfigError):
        cfg.update(workers=0)
