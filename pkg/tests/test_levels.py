import pytest
from hypothesis import given
from hypothesis import strategies as st

from aiplaytest import levels
from aiplaytest.errors import ConfigurationError


def test_reference_pack_shape():
    pack = levels.reference_pack()
    assert [lv.name for lv in pack] == ["E1", "E2", "E3", "E4", "E5", "H1", "H2", "H3", "H4", "H5"]
    assert [lv.level_id for lv in pack] == list(range(1, 11))
    assert [lv.name for lv in levels.by_name(pack, levels.HARDEST)] == list(levels.HARDEST)


def test_by_name_unknown():
    with pytest.raises(KeyError):
        levels.by_name(levels.reference_pack(), ["Z9"])


@given(st.integers(1, 40), st.integers(0, 2**32), st.integers(1, 500))
def test_generated_pack_is_valid_and_deterministic(n, seed, first):
    pack = levels.generate_pack(n, seed, first)
    assert pack == levels.generate_pack(n, seed, first)
    assert [lv.level_id for lv in pack] == list(range(first, first + n))
    for lv in pack:
        assert 3 <= lv.num_colors <= 6 and 6 <= lv.width == lv.height <= 9
        assert 10 <= lv.move_budget <= 20 and lv.goal_count >= 2


def test_pack_text_roundtrip():
    pack = levels.reference_pack() + levels.generate_pack(5, seed=2, first_id=11)
    text = levels.dumps_pack(pack, header="reference\nplus five")
    assert text.startswith("# reference\n# plus five\n")
    assert levels.loads_pack(text) == pack


def test_pack_file_roundtrip(tmp_path):
    pack = levels.generate_pack(3)
    levels.write_pack(tmp_path / "p.ini", pack)
    assert levels.read_pack(tmp_path / "p.ini") == pack


GOOD = "[A]\n" + "".join(f"{k} = {v}\n" for k, v in zip(levels.PACK_KEYS, (1, 5, 5, 3, 10, 5, 0)))


@pytest.mark.parametrize("text", [
    "",
    GOOD + "colour = 3\n",
    GOOD.replace("move_budget = 5\n", ""),
    GOOD.replace("= 10", "= ten"),
    GOOD.replace("num_colors = 3", "num_colors = 1"),
    GOOD + GOOD.replace("[A]", "[B]"),
    "[A\nlevel_id = 1\n",
])
def test_bad_packs_rejected(text):
    with pytest.raises(ConfigurationError):
        levels.loads_pack(text)


def test_good_pack_parses():
    (lv,) = levels.loads_pack(GOOD)
    assert lv.name == "A" and lv.goal_count == 10
