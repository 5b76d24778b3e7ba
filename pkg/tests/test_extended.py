"""
tandemnet — Extended Test Suite
Tests for configuration, logging, report export and run manifests.
"""

import importlib
import json
import logging
import os
import sys

import pandas as pd
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))


# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
#  Configuration Tests
# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

class TestConfig:
    def test_neuron_defaults(self):
        import config
        assert config.IF_THRESHOLD == 1.0
        assert config.LIF_THRESHOLD == 0.1
        assert config.LIF_TAU_M == 20.0

    def test_exit_codes_distinct(self):
        import config
        assert (config.EXIT_OK, config.EXIT_USAGE, config.EXIT_NUMERIC) == (0, 2, 3)

    def test_batch_norm_momentum_weights_old_statistic(self):
        import config
        assert 0.0 < config.BN_MOMENTUM < 1.0
        assert config.BN_MOMENTUM == 0.9

    def test_log_dir_from_env(self, monkeypatch, tmp_path):
        import config
        monkeypatch.setenv("TANDEMNET_LOG_DIR", str(tmp_path / "elsewhere"))
        importlib.reload(config)
        try:
            assert config.LOG_DIR == tmp_path / "elsewhere"
        finally:
            monkeypatch.delenv("TANDEMNET_LOG_DIR")
            importlib.reload(config)

    def test_empty_env_falls_back(self, monkeypatch):
        import config
        monkeypatch.setenv("TANDEMNET_LOG_DIR", "")
        assert config._env("TANDEMNET_LOG_DIR", "fallback") == "fallback"


# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
#  Logging Config Tests
# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

class TestLoggingConfig:
    def test_get_logger_returns_logger(self):
        from utils.logging_config import get_logger
        logger = get_logger("test_module")
        assert logger is not None
        assert logger.name == "tandemnet.test_module"

    def test_logger_has_handlers(self):
        from utils.logging_config import get_logger
        logger = get_logger("test_handlers")
        assert len(logger.handlers) >= 2  # console + file
        assert logger.propagate is False

    def test_handlers_not_duplicated(self):
        from utils.logging_config import get_logger
        first = len(get_logger("twice").handlers)
        assert len(get_logger("twice").handlers) == first

    def test_log_dir_exists(self):
        from utils.logging_config import LOG_DIR
        assert LOG_DIR.exists()

    def test_console_level(self):
        from utils import logging_config
        try:
            logging_config.set_console_level(logging.WARNING)
            assert logging_config._console_handler.level == logging.WARNING
        finally:
            logging_config.set_console_level(logging.INFO)


# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
#  Export Tests
# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

class TestExport:
    def test_csv_bytes_without_index(self):
        from utils.export import to_csv_bytes
        raw = to_csv_bytes(pd.DataFrame({"T": [4, 8], "value": [0.5, 0.25]}))
        assert raw == b"T,value\n4,0.5\n8,0.25\n"

    def test_write_csv_creates_parent(self, tmp_path):
        from utils.export import write_csv
        path = write_csv(pd.DataFrame({"a": [1]}), tmp_path / "deep" / "out.csv")
        assert path.read_text() == "a\n1\n"

    def test_metric_writer_flush_rewrites(self, tmp_path):
        from utils.export import METRIC_COLUMNS, MetricWriter
        writer = MetricWriter(tmp_path / "metrics.csv")
        writer.add(1, "train", "loss", 0.9)
        writer.flush()
        writer.add(1, "test", "accuracy", 0.5)
        writer.flush()
        frame = pd.read_csv(tmp_path / "metrics.csv")
        assert list(frame.columns) == METRIC_COLUMNS
        assert frame["metric"].tolist() == ["loss", "accuracy"]

    def test_metric_writer_in_memory(self):
        from utils.export import MetricWriter
        writer = MetricWriter()
        writer.add(2, "train", "loss", 1)
        writer.flush()
        assert writer.frame().iloc[0].to_dict() == {"epoch": 2, "split": "train", "metric": "loss", "value": 1.0}


# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
#  Run Manifest Tests
# ━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━

class TestManifest:
    def test_start_then_finish(self, tmp_path):
        from utils.manifest import MANIFEST_NAME, STATUS_NAME, record_finish, record_start
        manifest = record_start(tmp_path, {"arch": "fc:4-2", "T": 8}, 7, "ab" * 20,
                                {"checkpoint": tmp_path / "model.tdnn"})
        before = (tmp_path / MANIFEST_NAME).read_bytes()
        record_finish(tmp_path, manifest, status="success", duration=1.23456, final_metrics={"accuracy": 0.9})

        assert (tmp_path / MANIFEST_NAME).read_bytes() == before
        stored = json.loads(before)
        assert stored["seed"] == 7 and stored["config"]["T"] == 8
        assert stored["outputs"]["checkpoint"] == str(tmp_path / "model.tdnn")
        status = json.loads((tmp_path / STATUS_NAME).read_text())
        assert status["status"] == "success"
        assert status["duration_sec"] == 1.235
        assert status["final_metrics"] == {"accuracy": 0.9}
        assert status["started_at"] == manifest.started_at

    def test_failed_run(self, tmp_path):
        from utils.manifest import STATUS_NAME, record_finish, record_start
        manifest = record_start(tmp_path, {}, 0, "0" * 40, {})
        record = record_finish(tmp_path, manifest, status="failed")
        assert record["final_metrics"] == {}
        assert json.loads((tmp_path / STATUS_NAME).read_text())["status"] == "failed"

    def test_manifest_is_frozen(self, tmp_path):
        from utils.manifest import record_start
        manifest = record_start(tmp_path, {}, 0, "0" * 40, {})
        with pytest.raises(AttributeError):
            manifest.seed = 1
