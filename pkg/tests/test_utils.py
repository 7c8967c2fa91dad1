from dataclasses import dataclass

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from mint_tta.errors import ConfigError, MintError
from mint_tta.registry import METHODS_TO_REGISTER, register_method
from mint_tta.utils import (
    EXIT_IO,
    EXIT_OK,
    EXIT_USAGE,
    GeneratorWithState,
    Result,
    canonical_json,
    command_do,
    dataclass_kwargs,
    decode_tensors,
    defer,
    encode_tensors,
    load_tensors,
    reject_unknown_keys,
    save_tensors,
    with_defers,
)


def test_snapshot_round_trip_keeps_names_and_shapes():
    tensors = {"a": np.arange(6.0).reshape(2, 3), "scalar": np.array(1.5), "empty": np.zeros((0, 4))}
    decoded = decode_tensors(encode_tensors(tensors))

    assert list(decoded) == ["a", "scalar", "empty"]
    for name, array in tensors.items():
        assert decoded[name].shape == array.shape
        assert_array_equal(decoded[name], array)


def test_snapshot_layout_is_little_endian():
    payload = encode_tensors({"x": np.array([1.0])})
    assert payload[:8] == b"MINTTNSR"
    assert payload[8:12] == (1).to_bytes(4, "little")
    assert payload[-8:] == np.array([1.0], dtype="<f8").tobytes()


def test_snapshot_rejects_bad_magic_and_trailing_bytes():
    with pytest.raises(ConfigError):
        decode_tensors(b"NOTMAGIC" + bytes(4))
    with pytest.raises(ConfigError):
        decode_tensors(encode_tensors({"x": np.ones(2)}) + b"\0")


def test_snapshot_files(tmp_path):
    path = save_tensors(tmp_path / "nested" / "t.mtn", {"x": np.ones(3)}).unwrap()
    assert_array_equal(load_tensors(path).unwrap()["x"], np.ones(3))

    assert isinstance(load_tensors(tmp_path / "missing.mtn").unwrap_error(), OSError)

    (tmp_path / "truncated.mtn").write_bytes(path.read_bytes()[:-4])
    assert load_tensors(tmp_path / "truncated.mtn").is_error


def test_result_do_short_circuits():
    @Result.do()
    def halve(value: int) -> int:
        if value % 2:
            Result.do_error(f"{value} is odd")
        return value // 2

    @Result.do()
    def quarter(value: int) -> int:
        return halve(halve(value).then()).then()

    assert quarter(8).unwrap() == 2
    assert quarter(6).unwrap_error() == "3 is odd"


def test_result_do_catches_listed_exceptions_only():
    @Result.do(catch=(ConfigError,))
    def fail(exception: Exception):
        raise exception

    assert isinstance(fail(ConfigError("bad")).unwrap_error(), ConfigError)
    with pytest.raises(KeyError):
        fail(KeyError("other"))


def test_result_unwrap_reraises_stored_exception():
    with pytest.raises(ConfigError):
        Result.error(ConfigError("bad")).unwrap()
    assert Result.ok(2).unwrap() == 2
    with pytest.raises(ValueError):
        Result.error("no").unwrap()


def test_defers_run_in_reverse_order():
    calls = []

    @with_defers
    def work():
        defer(calls.append, "first")
        defer(calls.append, "second")
        calls.append("body")

    work()
    assert calls == ["body", "second", "first"]


def test_defer_outside_with_defers_raises():
    with pytest.raises(RuntimeError):
        defer(print)


def test_generator_with_state_keeps_return_value():
    def numbers():
        yield 1
        yield 2
        return "done"

    generator = GeneratorWithState(numbers())
    assert generator.collect() == ([1, 2], "done")
    assert generator.stopped and generator.last_yielded == 2


def test_command_do_maps_errors_to_exit_codes():
    @command_do
    def command(error: Exception | None):
        if error is not None:
            raise error

    assert command(None) == EXIT_OK
    assert command(ConfigError("bad")) == EXIT_USAGE
    assert command(MintError("bad")) == EXIT_USAGE
    assert command(FileNotFoundError("gone")) == EXIT_IO
    assert command(RuntimeError("boom")) == EXIT_USAGE


def test_strict_json_helpers():
    @dataclass(frozen=True)
    class Pair:
        left: int = 0
        right: tuple[int, ...] = ()

    assert dataclass_kwargs({"left": 1, "right": [2, 3]}, Pair, "pair") == {"left": 1, "right": (2, 3)}
    with pytest.raises(ConfigError, match="middle"):
        reject_unknown_keys({"middle": 1}, Pair, "pair")
    with pytest.raises(ConfigError):
        reject_unknown_keys([1, 2], {"a"}, "pair")
    assert canonical_json({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'


def test_duplicate_method_registration_is_rejected():
    def runner():
        pass

    register_method("duplicate-check")(runner)
    try:
        with pytest.raises(ValueError):
            register_method("duplicate-check")(runner)
    finally:
        METHODS_TO_REGISTER.pop("duplicate-check")
