import dataclasses

import numpy as np
import pytest

from adaptmt.adaptation import (
    AdaptiveSession,
    ModelConfig,
    TrainingPair,
    load_config,
    save_config,
    serialize_config,
)
from adaptmt.errors import CheckpointError, ConfigError, NumericError


class TestConfig:
    def _write(self, tmp_path, text):
        path = tmp_path / "proj.cfg"
        path.write_text(text)
        return path

    def test_minimal_file_gets_defaults(self, tmp_path):
        path = self._write(
            tmp_path,
            "version: 1\nproject_id: p1\nsrc_lang: en\ntgt_lang: de\ncheckpoint_path: model.ckpt\n",
        )
        config = load_config(path)
        assert config.beam_size == 1
        assert config.ol_iterations == 1
        assert config.checkpoint_every == 10
        assert config.learning_rate == 0.05
        assert config.bpe_model_path is None
        # relative paths resolve against the config directory
        assert config.checkpoint_path == str((tmp_path / "model.ckpt").resolve())

    def test_zero_learning_rate_rejected(self, tmp_path):
        path = self._write(
            tmp_path,
            "version: 1\nproject_id: p\nsrc_lang: a\ntgt_lang: b\n"
            "checkpoint_path: m.ckpt\nlearning_rate: 0\n",
        )
        with pytest.raises(ConfigError, match="learning_rate"):
            load_config(path)

    def test_missing_required_key_is_named(self, tmp_path):
        path = self._write(tmp_path, "version: 1\nproject_id: p\nsrc_lang: a\ntgt_lang: b\n")
        with pytest.raises(ConfigError, match="checkpoint_path"):
            load_config(path)

    def test_version_header_required(self, tmp_path):
        path = self._write(tmp_path, "project_id: p\n")
        with pytest.raises(ConfigError, match="version"):
            load_config(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = self._write(
            tmp_path,
            "version: 1\nproject_id: p\nsrc_lang: a\ntgt_lang: b\n"
            "checkpoint_path: m\nwarp_drive: 9\n",
        )
        with pytest.raises(ConfigError, match="warp_drive"):
            load_config(path)

    def test_comments_and_blank_lines(self, tmp_path):
        path = self._write(
            tmp_path,
            "# project config\nversion: 1\n\nproject_id: p\nsrc_lang: a\n"
            "tgt_lang: b\ncheckpoint_path: m.ckpt\n",
        )
        assert load_config(path).project_id == "p"

    def test_serialize_roundtrip(self, tmp_path):
        path = self._write(
            tmp_path,
            "version: 1\nproject_id: p1\nsrc_lang: en\ntgt_lang: de\n"
            "checkpoint_path: model.ckpt\nbpe_model_path: bpe.txt\n"
            "learning_rate: 0.1\nol_iterations: 3\nbeam_size: 2\n"
            "max_length: 33\ncheckpoint_every: 5\n",
        )
        config = load_config(path)
        path2 = tmp_path / "copy.cfg"
        save_config(config, path2)
        assert load_config(path2) == config

    def test_validate_bounds(self):
        base = dict(
            project_id="p", src_lang="a", tgt_lang="b", checkpoint_path="/c.ckpt"
        )
        with pytest.raises(ConfigError):
            ModelConfig(**base, ol_iterations=0).validate()
        with pytest.raises(ConfigError):
            ModelConfig(**base, checkpoint_every=-1).validate()
        with pytest.raises(ConfigError):
            ModelConfig(**base, tokenizer="fancy").validate()
        assert ModelConfig(**base, checkpoint_every=0).validate()


class TestTranslateSegment:
    def test_deterministic_between_updates(self, demo_config):
        session = AdaptiveSession.from_config(demo_config)
        first, hyp1 = session.translate_segment("the report is new.")
        second, hyp2 = session.translate_segment("the report is new.")
        assert first == second
        assert hyp1 != hyp2  # distinct hypothesis ids
        assert session.hypothesis(hyp1) == ("the report is new.", first)

    def test_unknown_characters_do_not_crash(self, demo_config):
        session = AdaptiveSession.from_config(demo_config)
        text, _ = session.translate_segment("Ωψ ξξξ")
        assert isinstance(text, str)

    def test_empty_segment_rejected(self, demo_config):
        session = AdaptiveSession.from_config(demo_config)
        with pytest.raises(ValueError, match="untranslatable"):
            session.translate_segment("   ")


class TestConfirmAndUpdate:
    def test_report_fields_and_counter(self, demo_config):
        session = AdaptiveSession.from_config(demo_config)
        pair = TrainingPair("the report is new.", "el informe es nuevo.", "s1")
        report = session.confirm_and_update(pair)
        assert report.steps == demo_config.ol_iterations
        assert report.elapsed_seconds >= 0.0
        assert session.updates_applied == 1
        assert len(session.update_log) == 1

    def test_post_loss_is_current_loss(self, demo_config):
        """The update is synchronous: the reported post-loss is observable."""
        session = AdaptiveSession.from_config(demo_config)
        pair = TrainingPair("the file is old.", "el archivo es antiguo.", "s1")
        report = session.confirm_and_update(pair)
        assert session.pair_loss(pair) == pytest.approx(report.post_loss, abs=1e-12)

    def test_descent_in_most_trials(self, demo_config):
        config = dataclasses.replace(demo_config, learning_rate=1e-3, ol_iterations=1)
        session = AdaptiveSession.from_config(config)
        rng = np.random.default_rng(5)
        words = ["report", "file", "manual", "invoice", "budget", "new", "old", "sends"]
        non_increasing = 0
        trials = 50
        for i in range(trials):
            src = " ".join(rng.choice(words, size=rng.integers(3, 6)))
            tgt = " ".join(rng.choice(words, size=rng.integers(3, 6)))
            report = session.confirm_and_update(TrainingPair(src, tgt, f"s{i}"))
            non_increasing += report.post_loss <= report.pre_loss + 1e-12
        assert non_increasing >= 0.95 * trials

    def test_overfit_single_pair_reproduces_post_edit(self, demo_config):
        config = dataclasses.replace(demo_config, learning_rate=0.1, ol_iterations=1)
        session = AdaptiveSession.from_config(config)
        pair = TrainingPair("the manager opens the budget.", "el gerente abre el presupuesto.", "s1")
        for _ in range(50):
            session.confirm_and_update(pair)
        text, _ = session.translate_segment(pair.source)
        assert text == pair.post_edit

    def test_updates_visible_to_next_translation(self, demo_config):
        config = dataclasses.replace(demo_config, learning_rate=0.1, ol_iterations=2)
        session = AdaptiveSession.from_config(config)
        source = "the client signs the contract."
        before, _ = session.translate_segment(source)
        report = session.confirm_and_update(TrainingPair(source, "el cliente firma el contrato.", "s1"))
        after, _ = session.translate_segment(source)
        assert after != before or report.post_loss == pytest.approx(report.pre_loss)

    def test_rollback_on_numeric_failure(self, demo_config):
        session = AdaptiveSession.from_config(demo_config)
        before = session.model.param_hash()
        session.model.params_["out.b"].data[0] = np.nan
        broken_hash = session.model.param_hash()
        with pytest.raises(NumericError):
            session.confirm_and_update(TrainingPair("the report.", "el informe.", "s1"))
        assert session.model.param_hash() == broken_hash  # bit-identical to pre-update state
        assert session.updates_applied == 0
        # clean model: failure injected via a poisoned gradient path instead
        session2 = AdaptiveSession.from_config(demo_config)
        assert session2.model.param_hash() == before

    def test_empty_post_edit_rejected(self, demo_config):
        session = AdaptiveSession.from_config(demo_config)
        with pytest.raises(ValueError, match="post-edit"):
            session.confirm_and_update(TrainingPair("the report.", "  ", "s1"))

    def test_update_log_export_format(self, demo_config):
        session = AdaptiveSession.from_config(demo_config)
        session.confirm_and_update(TrainingPair("the report.", "el informe.", "seg-7", timestamp=0.0))
        out = session.export_update_log()
        fields = out.strip().split("\t")
        assert fields[0] == "seg-7"
        assert fields[1].startswith("1970-01-01T00:00:00")
        float(fields[2]), float(fields[3])


class TestCheckpointRestore:
    def test_roundtrip_translations_bit_identical(self, demo_config, tmp_path):
        session = AdaptiveSession.from_config(demo_config)
        session.confirm_and_update(TrainingPair("the report is new.", "el informe es nuevo.", "s1"))
        path = session.checkpoint(tmp_path / "snap.ckpt")
        restored = AdaptiveSession.restore(path, demo_config)
        for source in ("the report is new.", "the client opens the file."):
            assert restored.translate_segment(source)[0] == session.translate_segment(source)[0]
        assert restored.model.param_hash() == session.model.param_hash()

    def test_replay_equivalence(self, demo_config, tmp_path):
        """Checkpoint after k updates, restore, confirm next pair: same post-loss."""
        pairs = [
            TrainingPair("the report is new.", "el informe es nuevo.", "s1"),
            TrainingPair("the file is old.", "el archivo es antiguo.", "s2"),
            TrainingPair("the manager sends the invoice.", "el gerente envia la factura.", "s3"),
        ]
        continuous = AdaptiveSession.from_config(demo_config)
        continuous.confirm_and_update(pairs[0])
        continuous.confirm_and_update(pairs[1])
        snap = continuous.checkpoint(tmp_path / "k2.ckpt")
        report_direct = continuous.confirm_and_update(pairs[2])

        resumed = AdaptiveSession.restore(snap, demo_config)
        report_resumed = resumed.confirm_and_update(pairs[2])
        assert report_resumed.post_loss == pytest.approx(report_direct.post_loss, abs=1e-12)
        assert resumed.model.param_hash() == continuous.model.param_hash()

    def test_restore_wrong_version(self, demo_config, tmp_path):
        import json
        import zipfile

        bad = tmp_path / "bad.ckpt"
        with zipfile.ZipFile(bad, "w") as zf:
            zf.writestr("meta.json", json.dumps({"format": "nope-v0"}))
        with pytest.raises(CheckpointError, match="incompatible checkpoint"):
            AdaptiveSession.restore(bad, demo_config)

    def test_auto_checkpoint_every_n(self, demo_config, tmp_path):
        ckpt = tmp_path / "auto.ckpt"
        config = dataclasses.replace(demo_config, checkpoint_path=str(ckpt), checkpoint_every=2)
        session = AdaptiveSession.restore(demo_config.checkpoint_path, config)
        session.confirm_and_update(TrainingPair("the report.", "el informe.", "s1"))
        assert not ckpt.exists()
        session.confirm_and_update(TrainingPair("the file.", "el archivo.", "s2"))
        assert ckpt.exists()
