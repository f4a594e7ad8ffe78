import json

import pytest

from emofocus.backend import save_model, train_ngram
from emofocus.cli import run
from emofocus.synthetic import generate_benchmark, write_benchmark

from fixtures import FLU_CORPUS


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A trained model plus a small benchmark file on disk."""
    root = tmp_path_factory.mktemp("cli")
    bench = root / "bench.jsonl"
    examples = generate_benchmark(8, 600, seed=0)
    write_benchmark(examples[:500], str(bench))
    held = root / "held.jsonl"
    write_benchmark(examples[500:], str(held))
    model = root / "model.pcm"
    assert run(
        [
            "train", "--corpus", str(bench), "--order", "3",
            "--discount", "0.75", "--out", str(model),
        ]
    ) == 0
    flu_corpus = root / "flu.jsonl"
    with open(flu_corpus, "w") as fh:
        for emotion, text in FLU_CORPUS:
            fh.write(json.dumps({"emotion": emotion, "text": text}) + "\n")
    flu_model = root / "flu.pcm"
    save_model(train_ngram(FLU_CORPUS, order=2, discount=0.75), str(flu_model))
    return {
        "root": root,
        "bench": str(bench),
        "held": str(held),
        "model": str(model),
        "flu_model": str(flu_model),
    }


def run_capture(capsys, argv):
    code = run(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestBasics:
    def test_train_reports_summary(self, workspace, capsys):
        out_model = workspace["root"] / "retrain.pcm"
        code, out, _ = run_capture(
            capsys,
            ["train", "--corpus", workspace["bench"], "--out", str(out_model)],
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["vocab_size"] > 100
        assert doc["order"] == 3

    def test_emotion_subcommand(self, workspace, capsys):
        code, out, _ = run_capture(
            capsys,
            [
                "emotion", "--model", workspace["model"],
                "--text", "the gift with the party near the chair yesterday .",
                "--top", "3",
            ],
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["top"][0]["label"] == "joyful"

    def test_causes_golden_fixture(self, workspace, capsys):
        # On the flu fixture the two cause slots must occupy the top-k.
        code, out, _ = run_capture(
            capsys,
            [
                "causes", "--model", workspace["flu_model"],
                "--text", "i was sick from the flu", "--k", "2",
            ],
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["emotion"] == "sad"
        assert {s["word"] for s in doc["selection"]} == {"sick", "flu"}
        assert {s["position"] for s in doc["selection"]} == {2, 5}

    def test_world_replaces_cause_words(self, workspace, capsys):
        code, out, _ = run_capture(
            capsys,
            [
                "world", "--model", workspace["flu_model"],
                "--text", "i was sick from the flu",
                "--k", "2", "--n", "2", "--seed", "3",
            ],
        )
        assert code == 0
        doc = json.loads(out)
        assert len(doc["contexts"]) == 3
        for repl in doc["replaced"][1:]:
            assert {r["position"] for r in repl} == {2, 5}

    def test_generate_modes(self, workspace, capsys):
        base_args = [
            "generate", "--speaker", workspace["model"],
            "--gee", workspace["model"],
            "--context",
            "i felt so moved because of the gift with the party near the chair yesterday . well that chair sat in the corner .",
            "--seed", "5",
        ]
        code, focused, _ = run_capture(capsys, base_args + ["--mode", "focused"])
        assert code == 0
        code, base, _ = run_capture(capsys, base_args + ["--mode", "base"])
        assert code == 0
        assert focused.strip()
        assert base.strip()

    def test_generate_trace_line_per_token(self, workspace, capsys, tmp_path):
        trace = tmp_path / "trace.jsonl"
        code, out, _ = run_capture(
            capsys,
            [
                "generate", "--speaker", workspace["model"],
                "--gee", workspace["model"],
                "--context",
                "the gift and the party left me shaken by the chair yesterday .",
                "--mode", "focused", "--seed", "2", "--max-len", "12",
                "--trace", str(trace),
            ],
        )
        assert code == 0
        n_tokens = len(out.strip().split())
        lines = [
            json.loads(line)
            for line in trace.read_text().splitlines()
            if line.strip()
        ]
        assert len(lines) == n_tokens
        for i, line in enumerate(lines):
            assert set(line) == {
                "step", "token", "prior", "s0_logit", "l0_logit", "floored",
            }
            assert line["step"] == i

    def test_alpha_zero_equals_base_end_to_end(self, workspace, capsys):
        common = [
            "generate", "--speaker", workspace["model"],
            "--gee", workspace["model"],
            "--context",
            "the gift and the party left me shaken by the chair yesterday .",
            "--seed", "4", "--max-len", "16",
        ]
        _, base, _ = run_capture(capsys, common + ["--mode", "base"])
        _, alpha0, _ = run_capture(
            capsys, common + ["--mode", "focused", "--alpha", "0"]
        )
        assert base == alpha0

    def test_eval_emotion(self, workspace, capsys):
        code, out, _ = run_capture(
            capsys,
            [
                "eval", "emotion", "--model", workspace["model"],
                "--data", workspace["held"], "--limit", "50",
            ],
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["accuracy"]["1"] >= 0.375
        assert doc["accuracy"]["5"] >= 0.85

    def test_eval_causes_with_baseline(self, workspace, capsys, tmp_path):
        csv_path = tmp_path / "report.csv"
        code, out, _ = run_capture(
            capsys,
            [
                "eval", "causes", "--model", workspace["model"],
                "--data", workspace["held"], "--baseline", "random",
                "--seed", "7", "--limit", "40", "--csv", str(csv_path),
            ],
        )
        assert code == 0
        doc = json.loads(out)
        for k in ("1", "3", "5"):
            assert doc["gee"]["recall"][k] >= doc["random"]["recall"][k]
        assert csv_path.read_text().startswith("method,k,recall")

    def test_eval_coverage_modes(self, workspace, capsys):
        code, out, _ = run_capture(
            capsys,
            [
                "eval", "coverage", "--speaker", workspace["model"],
                "--gee", workspace["model"], "--data", workspace["held"],
                "--limit", "25", "--max-len", "20",
            ],
        )
        assert code == 0
        doc = json.loads(out)
        assert set(doc["coverage"]) == {"base", "plain", "focused"}

    def test_sweep_report_shape(self, workspace, capsys):
        code, out, _ = run_capture(
            capsys,
            [
                "sweep", "--speaker", workspace["model"],
                "--gee", workspace["model"], "--data", workspace["held"],
                "--k", "1,2", "--limit", "10", "--max-len", "16",
            ],
        )
        assert code == 0
        doc = json.loads(out)
        assert [cell["k"] for cell in doc["grid"]] == [1, 2]
        for cell in doc["grid"]:
            assert set(cell) == {"mode", "k", "alpha", "beta", "coverage"}

    def test_synth_writes_benchmark(self, capsys, tmp_path):
        out_path = tmp_path / "synth.jsonl"
        code, out, _ = run_capture(
            capsys,
            ["synth", "--emotions", "8", "--sentences", "40", "--seed", "1",
             "--out", str(out_path)],
        )
        assert code == 0
        assert len(out_path.read_text().splitlines()) == 40


class TestExitCodes:
    def test_usage_error_is_one(self, workspace, capsys):
        code, _, err = run_capture(
            capsys,
            ["causes", "--model", workspace["model"], "--text", "hi", "--k", "0"],
        )
        assert code == 1
        assert "error" in err

    def test_data_error_is_two(self, capsys, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not json\n")
        code, _, _ = run_capture(
            capsys, ["train", "--corpus", str(bad), "--out", str(tmp_path / "m")]
        )
        assert code == 2

    def test_missing_file_is_two(self, capsys, tmp_path):
        code, _, _ = run_capture(
            capsys,
            ["train", "--corpus", str(tmp_path / "nope.jsonl"),
             "--out", str(tmp_path / "m")],
        )
        assert code == 2

    def test_corrupt_model_is_two(self, capsys, tmp_path):
        bad = tmp_path / "bad.pcm"
        bad.write_bytes(b"XXXX")
        code, _, _ = run_capture(capsys, ["emotion", "--model", str(bad), "--text", "hi"])
        assert code == 2

    def test_unknown_subcommand_is_one(self, capsys):
        code, _, _ = run_capture(capsys, ["frobnicate"])
        assert code == 1


class TestDeterminism:
    def test_repeated_runs_byte_identical(self, workspace, capsys):
        commands = [
            ["emotion", "--model", workspace["model"], "--text",
             "the gift with the party near the chair yesterday ."],
            ["causes", "--model", workspace["model"], "--text",
             "the gift and the party left me shaken by the chair yesterday .",
             "--k", "5"],
            ["world", "--model", workspace["model"], "--text",
             "the gift and the party left me shaken by the chair yesterday .",
             "--seed", "13"],
            ["generate", "--speaker", workspace["model"], "--gee",
             workspace["model"], "--context",
             "the gift and the party left me shaken by the chair yesterday .",
             "--mode", "focused", "--seed", "13", "--max-len", "16"],
            ["eval", "causes", "--model", workspace["model"], "--data",
             workspace["held"], "--baseline", "random", "--seed", "7",
             "--limit", "25"],
            ["eval", "coverage", "--speaker", workspace["model"], "--gee",
             workspace["model"], "--data", workspace["held"], "--limit",
             "10", "--max-len", "16"],
        ]
        for argv in commands:
            code1, out1, _ = run_capture(capsys, argv)
            code2, out2, _ = run_capture(capsys, argv)
            assert code1 == code2 == 0
            assert out1 == out2, f"non-deterministic output for {argv}"

    def test_jobs_parallelism_matches_serial(self, workspace, capsys):
        argv = [
            "eval", "coverage", "--speaker", workspace["model"], "--gee",
            workspace["model"], "--data", workspace["held"], "--limit",
            "12", "--max-len", "16",
        ]
        _, serial, _ = run_capture(capsys, argv + ["--jobs", "1"])
        _, parallel, _ = run_capture(capsys, argv + ["--jobs", "2"])
        assert serial == parallel

    def test_synth_deterministic(self, capsys, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        run_capture(capsys, ["synth", "--sentences", "60", "--out", str(a)])
        run_capture(capsys, ["synth", "--sentences", "60", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()


class TestManifest:
    def test_manifest_written_and_reruns(self, workspace, capsys, tmp_path):
        manifest = tmp_path / "run.json"
        argv = [
            "causes", "--model", workspace["model"], "--text",
            "the gift and the party left me shaken by the chair yesterday .",
            "--manifest", str(manifest),
        ]
        code, out1, _ = run_capture(capsys, argv)
        assert code == 0
        doc = json.loads(manifest.read_text())
        assert doc["command"] == "causes"
        assert doc["argv"] == argv
        assert workspace["model"] in doc["inputs"]
        code, out2, _ = run_capture(capsys, ["rerun", str(manifest)])
        assert code == 0
        assert out1 == out2

    def test_manifest_on_stderr_by_default(self, workspace, capsys):
        code, _, err = run_capture(
            capsys,
            ["emotion", "--model", workspace["model"], "--text", "the gift ."],
        )
        assert code == 0
        doc = json.loads(err.strip().splitlines()[-1])
        assert doc["command"] == "emotion"
        assert doc["tool_version"]
