import pytest

from varreg.config import parse_config
from varreg.errors import ConfigError

SEED = """\
# quadratic seed
[problem]
order = 1
interval = 0, 1
lagrangian = "y1^2/2"

[boundary]
left = 0:0
right = 0:1
"""


def with_line(extra, section="problem"):
    return SEED.replace(f"[{section}]\n", f"[{section}]\n{extra}\n", 1)


def test_minimal_seed():
    cfg = parse_config(SEED)
    assert cfg.problem.order == 1
    assert cfg.problem.interval == (0.0, 1.0)
    assert cfg.problem.lagrangian == "y1^2/2"
    assert cfg.boundary.left == {0: 0.0} and cfg.boundary.right == {0: 1.0}
    assert cfg.discretization.degree == 12 and cfg.discretization.grid == 1025
    assert cfg.solver.tol == 1e-10 and cfg.solver.max_iter == 100
    assert cfg.mollify.widths == (0.25, 0.125, 0.0625, 0.03125)


def test_order_zero():
    with pytest.raises(ConfigError) as info:
        parse_config(SEED.replace("order = 1", "order = 0"))
    assert info.value.line == 3


def test_duplicate_key_lines():
    with pytest.raises(ConfigError) as info:
        parse_config(SEED + "left = 0:1\n")
    assert info.value.line == 10
    assert "lines 8 and 10" in str(info.value)


def test_unknown_key():
    with pytest.raises(ConfigError) as info:
        parse_config(with_line("colour = red"))
    assert info.value.line == 3 and "colour" in str(info.value)


def test_unknown_section():
    with pytest.raises(ConfigError) as info:
        parse_config(SEED + "[plotting]\n")
    assert info.value.line == 10


@pytest.mark.parametrize("line", ["degree = twelve", "degree = 1.5", "panels = "])
def test_type_mismatch(line):
    with pytest.raises(ConfigError) as info:
        parse_config(SEED + "[discretization]\n" + line + "\n")
    assert info.value.line == 11


@pytest.mark.parametrize("key", ["order", "interval", "lagrangian"])
def test_missing_mandatory(key):
    text = "\n".join(l for l in SEED.splitlines() if not l.startswith(key))
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert key in str(info.value) and info.value.line is not None


def test_unquoted_expression():
    with pytest.raises(ConfigError) as info:
        parse_config(SEED.replace('"y1^2/2"', "y1^2/2"))
    assert info.value.line == 5


def test_expression_syntax_error():
    with pytest.raises(ConfigError) as info:
        parse_config(SEED.replace('"y1^2/2"', '"y1^2 +"'))
    assert info.value.line == 5 and "offset" in str(info.value)


def test_lagrangian_order_exceeded():
    with pytest.raises(ConfigError):
        parse_config(SEED.replace('"y1^2/2"', '"y2^2/2"'))


@pytest.mark.parametrize("section,line", [
    ("discretization", "grid = 1024"),
    ("discretization", "grid = 129"),
    ("solver", "tol = 0"),
    ("solver", "max_iter = -1"),
    ("mollify", "widths = 0.1, 0.2"),
    ("mollify", "box = 1, -1"),
    ("output", "formats = csv, pdf"),
    ("boundary", "left = 0:0, 2:1"),
])
def test_range_validation(section, line):
    text = SEED.replace("[boundary]\nleft = 0:0\n", "[boundary]\n") if line.startswith("left") else SEED
    text = text if section == "boundary" else text + f"[{section}]\n"
    with pytest.raises(ConfigError):
        parse_config(text + line + "\n")


def test_comments_and_hash_in_quotes():
    cfg = parse_config(SEED + '[mollify]\nsource = "abs(t - 0.5)"  # kink\nwidths = 0.5, 0.25\n')
    assert cfg.mollify.source == "abs(t - 0.5)"
    assert cfg.mollify.widths == (0.5, 0.25)


def test_optional_problem():
    cfg = parse_config("[solver]\ntol = 1e-9\n", require_problem=False)
    assert cfg.solver.tol == 1e-9
