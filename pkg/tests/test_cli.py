import json
import logging

import pytest

from mint_tta.cli import main
from mint_tta.utils import EXIT_IO, EXIT_OK, EXIT_USAGE

TINY_CONFIG = {
    "encoder": {
        "image_width": 8,
        "text_width": 8,
        "image_depth": 2,
        "text_depth": 1,
        "heads": 2,
        "grid": 2,
        "patch": 2,
        "num_classes": 3,
        "text_prompt_length": 2,
        "class_name_length": 1,
        "query_layers": 2,
    },
    "adapt": {"views": 4, "confidence": 0.5, "bank_size": 4, "prompt_length": 1, "selected_per_layer": 2},
    "dataset": {
        "num_classes": 3,
        "samples_per_class": 2,
        "domains": [{"name": "clean"}, {"name": "noise", "shifts": [{"kind": "gaussian-noise", "strength": 0.8}]}],
    },
    "methods": ["zero-shot", "mint"],
    "seed": 5,
}


def write_config(directory, **changes) -> str:
    path = directory / "config.json"
    path.write_text(json.dumps({**TINY_CONFIG, **changes}), encoding="utf-8")
    return str(path)


def test_run_writes_a_reproducible_report(tmp_path):
    config = write_config(tmp_path)

    assert main(["run", "--config", config, "--out", str(tmp_path / "first")]) == EXIT_OK
    assert main(["run", "--config", config, "--out", str(tmp_path / "second")]) == EXIT_OK

    first = (tmp_path / "first" / "report.csv").read_bytes()
    assert first == (tmp_path / "second" / "report.csv").read_bytes()

    lines = first.decode("utf-8").splitlines()
    assert lines[0] == "method,domain,top1,mean_loss,episodes"
    assert [line.split(",")[:2] for line in lines[1:5]] == [
        ["mint", "clean"],
        ["mint", "noise"],
        ["zero-shot", "clean"],
        ["zero-shot", "noise"],
    ]
    assert lines[5].startswith("# fingerprint=")

    traces = (tmp_path / "first" / "traces" / "mint.jsonl").read_text(encoding="utf-8").splitlines()
    assert len(traces) == 12
    assert json.loads(traces[0])["method"] == "mint"
    assert (tmp_path / "first" / "params.mtn").exists()


def test_seed_override_changes_the_fingerprint(tmp_path):
    config = write_config(tmp_path)

    assert main(["run", "--config", config, "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["run", "--config", config, "--seed", "6", "--out", str(tmp_path / "b")]) == EXIT_OK

    def fingerprint(directory):
        return (tmp_path / directory / "report.csv").read_text(encoding="utf-8").splitlines()[-1]

    assert fingerprint("a") != fingerprint("b")


def test_unknown_config_key_is_a_usage_error(tmp_path):
    config = write_config(tmp_path, learning_rate=0.1)
    assert main(["run", "--config", config, "--out", str(tmp_path / "out")]) == EXIT_USAGE
    assert not (tmp_path / "out").exists()


def test_unknown_method_is_a_usage_error(tmp_path):
    config = write_config(tmp_path, methods=["mint", "oracle"])
    assert main(["run", "--config", config, "--out", str(tmp_path / "out")]) == EXIT_USAGE


def test_unwritable_output_is_an_io_error(tmp_path):
    config = write_config(tmp_path, methods=["zero-shot"])
    blocker = tmp_path / "blocker"
    blocker.write_text("", encoding="utf-8")
    assert main(["run", "--config", config, "--out", str(blocker)]) == EXIT_IO


def test_missing_config_file_is_an_io_error(tmp_path):
    assert main(["run", "--config", str(tmp_path / "absent.json")]) == EXIT_IO


def test_bad_arguments(capsys):
    assert main(["train"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE
    assert main(["--help"]) == EXIT_OK
    assert "usage" in capsys.readouterr().out


def test_generate_writes_the_dataset(tmp_path):
    config = write_config(tmp_path)
    assert main(["generate", "--config", config, "--out", str(tmp_path / "data")]) == EXIT_OK
    assert (tmp_path / "data" / "dataset.mtn").exists()
    assert json.loads((tmp_path / "data" / "dataset.json").read_text(encoding="utf-8"))["domains"] == [
        "clean",
        "noise",
    ]


def test_sweep_needs_parameters(tmp_path):
    config = write_config(tmp_path)
    assert main(["sweep", "--config", config, "--out", str(tmp_path / "out")]) == EXIT_USAGE


def test_sweep_writes_one_row_group_per_value(tmp_path):
    config = write_config(tmp_path)
    arguments = ["sweep", "--config", config, "--out", str(tmp_path / "out"), "--param", "kappa"]
    assert main([*arguments, "--values", "0.25", "1"]) == EXIT_OK

    lines = (tmp_path / "out" / "sweep-kappa.csv").read_text(encoding="utf-8").splitlines()
    methods = sorted({line.split(",")[0] for line in lines[1:-1]})
    assert methods == ["mint@kappa=0.25", "mint@kappa=1"]


@pytest.mark.parametrize("verbose", [[], ["--verbose"]])
def test_gradcheck_command(verbose):
    assert main(["gradcheck", "--cases", "1", "--max-entries", "3", *verbose]) == EXIT_OK


def test_logging_is_restored_after_a_command(tmp_path):
    package_logger = logging.getLogger("mint_tta")
    handlers = package_logger.handlers[:]

    main(["run", "--config", write_config(tmp_path, methods=["zero-shot"]), "--out", str(tmp_path / "out")])
    assert package_logger.handlers == handlers


def test_ablate_over_seeds_archives_each_run_and_the_ordering(tmp_path):
    config = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["ablate", "--config", config, "--out", str(out), "--seeds", "2"]) == EXIT_OK

    for seed in (5, 6):
        lines = (out / f"seed-{seed}" / "ablation.csv").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 1 + 6 * 2 + 1

    ordering = json.loads((out / "ordering.json").read_text(encoding="utf-8"))
    assert ordering["seeds"] == 2
    assert ordering["shifted_domains"] == ["noise"]
    assert set(ordering["median_accuracy"]) == {"mint", "text+general", "text-only", "zero-shot"}


def test_ablate_rejects_a_non_positive_seed_count(tmp_path):
    config = write_config(tmp_path)
    assert main(["ablate", "--config", config, "--out", str(tmp_path / "out"), "--seeds", "0"]) == EXIT_USAGE
