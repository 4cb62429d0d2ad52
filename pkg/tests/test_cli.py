"""The batch CLI: staged vs single-shot parity, config precedence, exit codes."""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from refex.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, *args, env=None):
    return runner.invoke(main, [str(a) for a in args], env=env,
                         catch_exceptions=False)


def make_corpus(runner, tmp_path, *, seed=21, pages=4, **flags) -> Path:
    corpus = tmp_path / "corpus"
    args = ["synth", "--seed", seed, "--pages", pages, "--out", corpus]
    for flag, value in flags.items():
        name = "--" + flag.replace("_", "-")
        if value is True:
            args.append(name)
        else:
            args.extend([name, value])
    got = invoke(runner, *args)
    assert got.exit_code == 0, got.output
    return corpus


class TestSynthCommand:
    def test_writes_corpus(self, runner, tmp_path):
        corpus = make_corpus(runner, tmp_path, pages=3)
        manifest = json.loads((corpus / "manifest.json").read_text())
        assert manifest["n_pages"] == 3
        assert len(list(corpus.glob("page_*.ocr.json"))) == 3
        assert len(list(corpus.glob("page_*.gold.json"))) == 3

    def test_deterministic_across_invocations(self, runner, tmp_path):
        a = make_corpus(runner, tmp_path / "a", seed=5, pages=3,
                        label_noise=0.5, inject_phone=True)
        b = make_corpus(runner, tmp_path / "b", seed=5, pages=3,
                        label_noise=0.5, inject_phone=True)
        for name in sorted(p.name for p in a.iterdir()):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_mix_restricts_layouts(self, runner, tmp_path):
        corpus = make_corpus(runner, tmp_path, pages=5, mix="label-left")
        manifest = json.loads((corpus / "manifest.json").read_text())
        assert {e["template"] for e in manifest["entries"]} == {"label-left"}

    def test_unknown_mix_exits_1(self, runner, tmp_path):
        got = invoke(runner, "synth", "--seed", 1, "--out", tmp_path / "x",
                     "--mix", "spiral")
        assert got.exit_code == 1
        assert "unknown layout kind" in got.output


class TestStagedVsRun:
    def test_byte_identical_entities(self, runner, tmp_path):
        corpus = make_corpus(runner, tmp_path, pages=3, label_noise=0.4,
                             inject_phone=True)
        run_out = tmp_path / "run_out"
        got = invoke(runner, "run", "--pages", corpus, "--out", run_out)
        assert got.exit_code == 0, got.output

        staged = tmp_path / "staged"
        for page_path in sorted(corpus.glob("page_*.ocr.json")):
            stem = page_path.name[:-len(".ocr.json")]
            tags = staged / f"{stem}.tags.json"
            ents = staged / f"{stem}.entities.json"
            assert invoke(runner, "tag", "--page", page_path,
                          "--out", tags).exit_code == 0
            assert invoke(runner, "decode", "--page", page_path,
                          "--predictions", tags,
                          "--out", ents).exit_code == 0
            want = (run_out / f"{stem}.entities.json").read_bytes()
            assert ents.read_bytes() == want, stem

    def test_jobs_parallel_matches_serial(self, runner, tmp_path):
        corpus = make_corpus(runner, tmp_path, pages=6, label_noise=0.3)
        serial, parallel = tmp_path / "serial", tmp_path / "parallel"
        assert invoke(runner, "run", "--pages", corpus,
                      "--out", serial).exit_code == 0
        assert invoke(runner, "run", "--pages", corpus, "--out", parallel,
                      "--jobs", 4).exit_code == 0
        for path in sorted(serial.iterdir()):
            assert (parallel / path.name).read_bytes() == path.read_bytes()

    def test_group_command_output(self, runner, tmp_path):
        corpus = make_corpus(runner, tmp_path, pages=1)
        page = next(corpus.glob("page_*.ocr.json"))
        out = tmp_path / "groups.json"
        assert invoke(runner, "group", "--page", page,
                      "--out", out).exit_code == 0
        data = json.loads(out.read_text())
        n_tokens = len(json.loads(page.read_text())["tokens"])
        assert len(data["reading_order"]) == n_tokens


class TestRunFailureModes:
    def test_missing_pages_dir_exits_1(self, runner, tmp_path):
        got = invoke(runner, "run", "--pages", tmp_path / "nope",
                     "--out", tmp_path / "out")
        assert got.exit_code == 1
        assert "not found" in got.output

    def test_empty_pages_dir_exits_1(self, runner, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        got = invoke(runner, "run", "--pages", empty, "--out", tmp_path / "out")
        assert got.exit_code == 1

    def test_file_tagger_missing_predictions_exits_1(self, runner, tmp_path):
        corpus = make_corpus(runner, tmp_path, pages=2)
        got = invoke(runner, "run", "--pages", corpus, "--out", tmp_path / "o",
                     "--tagger", f"file:{tmp_path / 'tags'}")
        assert got.exit_code == 1
        assert "missing prediction files" in got.output

    def test_corrupt_page_tolerated_without_strict(self, runner, tmp_path):
        corpus = make_corpus(runner, tmp_path, pages=2)
        bad = corpus / "page_0099.ocr.json"
        bad.write_text("{}", encoding="utf-8")
        got = invoke(runner, "run", "--pages", corpus, "--out", tmp_path / "o")
        assert got.exit_code == 0
        assert "1 failed" in got.output

    def test_corrupt_page_fails_with_strict(self, runner, tmp_path):
        corpus = make_corpus(runner, tmp_path, pages=2)
        (corpus / "page_0099.ocr.json").write_text("{}", encoding="utf-8")
        got = invoke(runner, "run", "--pages", corpus, "--out", tmp_path / "o",
                     "--strict")
        assert got.exit_code == 1

    def test_bad_jobs_exits_1(self, runner, tmp_path):
        corpus = make_corpus(runner, tmp_path, pages=1)
        got = invoke(runner, "run", "--pages", corpus, "--out", tmp_path / "o",
                     "--jobs", 0)
        assert got.exit_code == 1


class TestEvalCommand:
    def _extracted(self, runner, tmp_path, **synth_flags):
        corpus = make_corpus(runner, tmp_path, pages=3, **synth_flags)
        out = tmp_path / "entities"
        assert invoke(runner, "run", "--pages", corpus,
                      "--out", out).exit_code == 0
        return corpus, out

    def test_perfect_clean_corpus(self, runner, tmp_path):
        corpus, ents = self._extracted(runner, tmp_path)
        report_path = tmp_path / "report.json"
        got = invoke(runner, "eval", "--pages", corpus, "--entities", ents,
                     "--out", report_path)
        assert got.exit_code == 0, got.output
        report = json.loads(report_path.read_text())
        assert report["overall"]["precision"] == 1.0
        assert report["overall"]["recall"] == 1.0
        assert "== Patient entities ==" in got.output

    def test_mode_flag_flows_to_report(self, runner, tmp_path):
        corpus, ents = self._extracted(runner, tmp_path)
        report_path = tmp_path / "report.json"
        got = invoke(runner, "eval", "--pages", corpus, "--entities", ents,
                     "--out", report_path, "--muc5-mode", "paper")
        assert got.exit_code == 0
        assert json.loads(report_path.read_text())["mode"] == "paper"

    def test_missing_entities_exit_1(self, runner, tmp_path):
        corpus = make_corpus(runner, tmp_path, pages=2)
        got = invoke(runner, "eval", "--pages", corpus,
                     "--entities", tmp_path / "nowhere")
        assert got.exit_code == 1
        assert "missing files" in got.output


class TestConfigPrecedence:
    def test_config_file_changes_behavior(self, runner, tmp_path):
        corpus = make_corpus(runner, tmp_path, pages=1, inject_phone=True)
        page = next(corpus.glob("page_*.ocr.json"))
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"hybrid": false}', encoding="utf-8")

        tags = tmp_path / "t.json"
        invoke(runner, "tag", "--page", page, "--out", tags)
        with_hybrid = tmp_path / "a.json"
        without = tmp_path / "b.json"
        invoke(runner, "decode", "--page", page, "--predictions", tags,
               "--out", with_hybrid)
        invoke(runner, "decode", "--page", page, "--predictions", tags,
               "--out", without, "--config", cfg)
        assert with_hybrid.read_bytes() != without.read_bytes()

    def test_env_var_used_as_fallback(self, runner, tmp_path):
        corpus = make_corpus(runner, tmp_path, pages=1, inject_phone=True)
        page = next(corpus.glob("page_*.ocr.json"))
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"hybrid": false}', encoding="utf-8")
        tags = tmp_path / "t.json"
        invoke(runner, "tag", "--page", page, "--out", tags)

        via_env = tmp_path / "env.json"
        via_flag = tmp_path / "flag.json"
        invoke(runner, "decode", "--page", page, "--predictions", tags,
               "--out", via_env, env={"REFEX_CONFIG": str(cfg)})
        invoke(runner, "decode", "--page", page, "--predictions", tags,
               "--out", via_flag, "--config", cfg)
        assert via_env.read_bytes() == via_flag.read_bytes()

    def test_flag_beats_config(self, runner, tmp_path):
        corpus = make_corpus(runner, tmp_path, pages=1)
        page = next(corpus.glob("page_*.ocr.json"))
        # config pins an absurd eps_y; the flag restores the default
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"eps_y": 0.9}', encoding="utf-8")
        defaulted = tmp_path / "d.json"
        flagged = tmp_path / "f.json"
        invoke(runner, "group", "--page", page, "--out", defaulted)
        invoke(runner, "group", "--page", page, "--out", flagged,
               "--config", cfg, "--eps-y", 0.006)
        assert flagged.read_bytes() == defaulted.read_bytes()

    def test_bad_config_json_exits_1(self, runner, tmp_path):
        corpus = make_corpus(runner, tmp_path, pages=1)
        page = next(corpus.glob("page_*.ocr.json"))
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{broken", encoding="utf-8")
        got = invoke(runner, "group", "--page", page,
                     "--out", tmp_path / "g.json", "--config", cfg)
        assert got.exit_code == 1


class TestServerMode:
    @pytest.fixture
    def server_url(self, monkeypatch):
        """Route the CLI's HTTP posts into an in-memory service instance."""
        from fastapi.testclient import TestClient
        from refex.service.app import create_app

        client = TestClient(create_app())
        base = "http://svc.test"

        def fake_post(url, json=None, timeout=None):
            assert url.startswith(base), url
            return client.post(url[len(base):], json=json)

        monkeypatch.setattr("httpx.post", fake_post)
        return base

    def test_run_byte_identical_to_in_process(self, runner, tmp_path,
                                              server_url):
        corpus = make_corpus(runner, tmp_path, pages=3, label_noise=0.4,
                             inject_phone=True)
        local = tmp_path / "local"
        remote = tmp_path / "remote"
        assert invoke(runner, "run", "--pages", corpus,
                      "--out", local).exit_code == 0
        assert invoke(runner, "run", "--pages", corpus, "--out", remote,
                      "--server", server_url).exit_code == 0
        names = sorted(p.name for p in local.iterdir())
        assert names == sorted(p.name for p in remote.iterdir())
        for name in names:
            assert (remote / name).read_bytes() == (local / name).read_bytes()

    def test_staged_via_server_matches_local(self, runner, tmp_path,
                                             server_url):
        corpus = make_corpus(runner, tmp_path, pages=1, inject_phone=True)
        page = next(corpus.glob("page_*.ocr.json"))
        for cmd, extra in (("group", ()), ("tag", ())):
            local = tmp_path / f"{cmd}_local.json"
            remote = tmp_path / f"{cmd}_remote.json"
            assert invoke(runner, cmd, "--page", page,
                          "--out", local).exit_code == 0
            assert invoke(runner, cmd, "--page", page, "--out", remote,
                          "--server", server_url).exit_code == 0
            assert remote.read_bytes() == local.read_bytes(), cmd
        tags = tmp_path / "tag_local.json"
        local = tmp_path / "dec_local.json"
        remote = tmp_path / "dec_remote.json"
        assert invoke(runner, "decode", "--page", page, "--predictions", tags,
                      "--out", local).exit_code == 0
        assert invoke(runner, "decode", "--page", page, "--predictions", tags,
                      "--out", remote, "--server", server_url).exit_code == 0
        assert remote.read_bytes() == local.read_bytes()

    def test_unreachable_server_exits_1(self, runner, tmp_path):
        corpus = make_corpus(runner, tmp_path, pages=1)
        got = invoke(runner, "run", "--pages", corpus,
                     "--out", tmp_path / "x", "--server", "http://127.0.0.1:1")
        assert got.exit_code == 1
        assert "failed" in got.output


class TestUsage:
    def test_missing_required_option_exits_2(self, runner):
        got = CliRunner().invoke(main, ["synth"])
        assert got.exit_code == 2

    def test_help_runs(self, runner):
        for cmd in ("synth", "group", "tag", "decode", "run", "eval", "serve"):
            got = invoke(runner, cmd, "--help")
            assert got.exit_code == 0
