import numpy as np
import pytest

from core.errors import InvalidConfig
from core.workloads import Op, ReferenceRam, generate_workload, load_script


def test_sequential_wraps():
    ops = generate_workload("sequential", 10, 25, np.random.default_rng(0))
    assert [op.address for op in ops] == [r % 10 for r in range(25)]


def test_hot_spot_hits_one_address():
    ops = generate_workload("hot-spot", 100, 50, np.random.default_rng(0), hot_address=42)
    assert {op.address for op in ops} == {42}
    with pytest.raises(InvalidConfig):
        generate_workload("hot-spot", 100, 5, np.random.default_rng(0), hot_address=100)


def test_uniform_random_mix():
    ops = generate_workload("uniform-random", 1000, 4000, np.random.default_rng(1))
    assert all(0 <= op.address < 1000 for op in ops)
    writes = [op for op in ops if op.kind == "write"]
    assert 0.45 < len(writes) / len(ops) < 0.55
    assert all(op.value is not None and op.value > 0 for op in writes)
    assert all(op.value is None for op in ops if op.kind == "read")


def test_same_seed_same_ops():
    first = generate_workload("uniform-random", 64, 100, np.random.default_rng(3))
    second = generate_workload("uniform-random", 64, 100, np.random.default_rng(3))
    assert first == second


def test_unknown_workload():
    with pytest.raises(InvalidConfig):
        generate_workload("zipf", 10, 5, np.random.default_rng(0))


def test_script(tmp_path):
    script = tmp_path / "ops.txt"
    script.write_text("# warm-up\nwrite 3 9\n\nread 3  # check\n")
    assert load_script(script, 16) == [Op("write", 3, 9), Op("read", 3)]
    assert generate_workload("scripted-file", 16, 0, np.random.default_rng(0), script=script) == load_script(script, 16)


@pytest.mark.parametrize("text", ["read\n", "write 1\n", "poke 1 2\n", "read 99\n", "read x\n"])
def test_bad_script_lines(tmp_path, text):
    script = tmp_path / "bad.txt"
    script.write_text(text)
    with pytest.raises(InvalidConfig):
        load_script(script, 16)


def test_scripted_workload_needs_a_file():
    with pytest.raises(InvalidConfig):
        generate_workload("scripted-file", 16, 1, np.random.default_rng(0))


def test_reference_ram():
    ram = ReferenceRam(4)
    assert ram.access("read", 2) == 0
    assert ram.access("write", 2, 8) == 0
    assert ram.access("read", 2) == 8
