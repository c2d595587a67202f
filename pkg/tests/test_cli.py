import json

import pytest

from stutterkit.audio import write_wav_file
from stutterkit.cli import main
from stutterkit.detectors import save_detector
from stutterkit.synth import gen_fluent_clip


@pytest.fixture(scope="module")
def model_files(trained_detectors, tmp_path_factory):
    out = tmp_path_factory.mktemp("models")
    pro, rep = trained_detectors
    save_detector(pro, out / "pro.grcn")
    save_detector(rep, out / "rep.grcn")
    return out / "pro.grcn", out / "rep.grcn"


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestGenCorpus:
    def test_writes_manifest_and_reports_counts(self, tmp_path, capsys):
        code, out, _ = run(
            capsys, "gen-corpus", "--out", str(tmp_path / "c"), "--n", "8",
            "--ratio", "0.25", "--seed", "3", "--clip-seconds", "1.0",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["n_clips"] == 8
        assert (tmp_path / "c" / "manifest.csv").exists()

    def test_bad_ratio_is_user_error(self, tmp_path, capsys):
        code, out, err = run(capsys, "gen-corpus", "--out", str(tmp_path), "--ratio", "2.0")
        assert code == 1
        assert out == ""
        assert "ratio" in err

    def test_chains_into_train(self, tmp_path, capsys):
        corpus = tmp_path / "chained"
        assert main(["gen-corpus", "--out", str(corpus), "--n", "8", "--ratio", "0.25",
                     "--seed", "2", "--clip-seconds", "1.0"]) == 0
        capsys.readouterr()
        code, out, _ = run(
            capsys, "train", "--kind", "prolongation", "--manifest", str(corpus / "manifest.csv"),
            "--out-model", str(tmp_path / "m.grcn"), "--epochs", "1", "--batch-size", "8",
        )
        assert code == 0
        assert "accuracy" in json.loads(out)


class TestTrain:
    def test_train_emits_metrics_and_model(self, small_corpus, tmp_path, capsys):
        model_path = tmp_path / "det.grcn"
        code, out, _ = run(
            capsys, "train", "--kind", "prolongation", "--manifest", str(small_corpus),
            "--out-model", str(model_path), "--epochs", "2", "--batch-size", "16", "--seed", "1",
        )
        assert code == 0
        metrics = json.loads(out)
        assert "accuracy" in metrics
        assert model_path.exists()

    def test_config_overrides(self, small_corpus, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"train": {"learning_rate": 0.002, "threshold": 0.6}}))
        code, out, _ = run(
            capsys, "train", "--kind", "prolongation", "--manifest", str(small_corpus),
            "--out-model", str(tmp_path / "m.grcn"), "--epochs", "1", "--config", str(config),
        )
        assert code == 0
        assert "accuracy" in json.loads(out)

    def test_missing_manifest_is_user_error(self, tmp_path, capsys):
        code, _, err = run(
            capsys, "train", "--kind", "prolongation", "--manifest", str(tmp_path / "nope.csv"),
            "--out-model", str(tmp_path / "m.grcn"),
        )
        assert code == 1
        assert err


class TestDiagnose:
    def test_ten_second_clip_ten_entries(self, model_files, tmp_path, capsys):
        pro, rep = model_files
        wav = tmp_path / "clip.wav"
        write_wav_file(gen_fluent_clip(11, 10.0), wav)
        report_path = tmp_path / "report.json"
        code, out, _ = run(
            capsys, "diagnose", "--model-prolongation", str(pro), "--model-repetition", str(rep),
            "--wav", str(wav), "--report-out", str(report_path),
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["n_segments"] == 10
        assert len(payload["per_segment"]) == 10
        assert payload["clip_id"] == "clip"
        assert json.loads(report_path.read_text()) == payload

    def test_reruns_byte_identical(self, model_files, tmp_path, capsys):
        pro, rep = model_files
        wav = tmp_path / "clip.wav"
        write_wav_file(gen_fluent_clip(12, 2.0), wav)
        argv = ["diagnose", "--model-prolongation", str(pro), "--model-repetition", str(rep),
                "--wav", str(wav)]
        outs = []
        for _ in range(2):
            code = main(argv)
            assert code == 0
            outs.append(capsys.readouterr().out)
        assert outs[0] == outs[1]

    def test_corrupt_model_is_user_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.grcn"
        bad.write_bytes(b"not a model")
        wav = tmp_path / "x.wav"
        write_wav_file(gen_fluent_clip(1, 1.0), wav)
        code, _, err = run(
            capsys, "diagnose", "--model-prolongation", str(bad), "--model-repetition", str(bad),
            "--wav", str(wav),
        )
        assert code == 1
        assert "error" in err


class TestSessionsAndRecommend(object):
    @pytest.fixture()
    def report_file(self, model_files, tmp_path, capsys):
        pro, rep = model_files
        wav = tmp_path / "r.wav"
        write_wav_file(gen_fluent_clip(13, 3.0), wav)
        report = tmp_path / "report.json"
        code = main(["diagnose", "--model-prolongation", str(pro), "--model-repetition", str(rep),
                     "--wav", str(wav), "--report-out", str(report)])
        capsys.readouterr()
        assert code == 0
        return report

    @pytest.fixture()
    def recommender_file(self, tmp_path, capsys):
        data = tmp_path / "rules.csv"
        model = tmp_path / "rec.json"
        assert main(["gen-therapy-data", "--out", str(data)]) == 0
        assert main(["train-recommender", "--data", str(data), "--out-model", str(model)]) == 0
        capsys.readouterr()
        return model

    def test_session_add(self, report_file, tmp_path, capsys):
        store = tmp_path / "store.jsonl"
        code, out, _ = run(
            capsys, "session-add", "--store", str(store), "--patient", "p1",
            "--report", str(report_file), "--timestamp", "1000",
        )
        assert code == 0
        record = json.loads(out)
        assert record["patient_id"] == "p1"
        assert record["ts"] == 1000
        assert store.exists()

    def test_out_of_order_session_is_user_error(self, report_file, tmp_path, capsys):
        store = tmp_path / "store.jsonl"
        assert main(["session-add", "--store", str(store), "--patient", "p1",
                     "--report", str(report_file), "--timestamp", "1000"]) == 0
        capsys.readouterr()
        code, _, err = run(
            capsys, "session-add", "--store", str(store), "--patient", "p1",
            "--report", str(report_file), "--timestamp", "500",
        )
        assert code == 1
        assert "timestamp" in err

    def test_recommend_insufficient_history(self, report_file, recommender_file, tmp_path, capsys):
        store = tmp_path / "store.jsonl"
        assert main(["session-add", "--store", str(store), "--patient", "p1",
                     "--report", str(report_file), "--timestamp", "1000"]) == 0
        capsys.readouterr()
        code, out, err = run(
            capsys, "recommend", "--store", str(store), "--patient", "p1",
            "--recommender", str(recommender_file),
        )
        assert code == 1
        assert out == ""
        assert "insufficient history" in err.lower() or "need >= 2" in err

    def test_recommend_full_flow(self, report_file, recommender_file, tmp_path, capsys):
        store = tmp_path / "store.jsonl"
        for ts in ("1000", "2000"):
            assert main(["session-add", "--store", str(store), "--patient", "p1",
                         "--report", str(report_file), "--timestamp", ts]) == 0
        capsys.readouterr()
        code, out, _ = run(
            capsys, "recommend", "--store", str(store), "--patient", "p1",
            "--recommender", str(recommender_file),
        )
        assert code == 0
        payload = json.loads(out)
        assert "items" in payload
        assert set(payload["profile"]) == {"prolongation", "repetition", "improvement"}


class TestTherapyData:
    def test_gen_and_train(self, tmp_path, capsys):
        data = tmp_path / "rules.csv"
        code, out, _ = run(capsys, "gen-therapy-data", "--out", str(data))
        assert code == 0
        assert json.loads(out)["rows"] == 64
        assert data.read_text().splitlines()[0] == "prolongation,repetition,improvement,Therapy 1,Therapy 2"

        model = tmp_path / "rec.json"
        code, out, _ = run(capsys, "train-recommender", "--data", str(data), "--out-model", str(model))
        assert code == 0
        accuracy = json.loads(out)["training_accuracy"]
        assert accuracy == {"Therapy 1": 1.0, "Therapy 2": 1.0}


class TestExitCodes:
    def test_unknown_flag(self, capsys):
        code, _, _ = run(capsys, "gen-corpus", "--bogus")
        assert code == 1

    def test_unknown_command(self, capsys):
        code, _, _ = run(capsys, "frobnicate")
        assert code == 1

    def test_no_command(self, capsys):
        code, _, _ = run(capsys)
        assert code == 1
