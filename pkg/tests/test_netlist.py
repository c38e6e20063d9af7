import random
from pathlib import Path

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings, strategies as st

from slhnet import NetlistError, parse_netlist, reduce, validate_document

NETLISTS = Path(__file__).resolve().parents[1] / "netlists"


def first_error(text):
    with pytest.raises(NetlistError) as info:
        parse_netlist(text)
    return info.value.diagnostics[0]


def test_beamsplitter_cavity_example():
    doc = parse_netlist((NETLISTS / "beamsplitter_cavity.net").read_text())
    assert list(doc.components) == ["M", "C", "N"]
    assert len(doc.connections) == 1
    assert doc.run == {"dt": 0.001, "T": 2.0}
    assert doc.state is not None


def test_empty_document():
    doc = parse_netlist("")
    assert not doc.components and not doc.connections and doc.state is None
    assert parse_netlist("# only a comment\n\n").components == {}


def test_undeclared_connection_points_at_line():
    d = first_error("space c fock 3\ncomponent A = cavity(c, 1, 0)\nconnect X -> A\n")
    assert (d.line, d.column) == (3, 9)
    assert "X" in d.message


def test_diagnostics_are_collected_across_statements():
    with pytest.raises(NetlistError) as info:
        parse_netlist("space c fock 3\nfoo bar\ncomponent A = cavity(q, 1, 0)\nspace c fock 2\n")
    assert [d.line for d in info.value.diagnostics] == [2, 3, 4]


@pytest.mark.parametrize("text, line, col", [
    ("space c fock", 1, 13),
    ("space c fock 3\ncomponent A { L=[a(c)] H=n(c)", 2, 13),
    ("space c fock 3\ncomponent A = cavity(c, 1, 0) extra", 2, 31),
    ("component A { S=[[1, 0]] }", 1, 15),
    ("space c fock 3\ncomponent A { L=[a(c)] H=a(c)^-1 }", 2, 30),
    ("space c fock 3\nstate fock(c, 7)", 2, 7),
    ("space c dim 3\ncomponent A = cavity(c, 1, 0)", 2, 22),
    ("run { dt=0.1 speed=2 }", 1, 14),
    ("x = 1 $", 1, 7),
])
def test_error_positions(text, line, col):
    d = first_error(text)
    assert (d.line, d.column) == (line, col), d


def test_expression_language():
    doc = parse_netlist("space c fock 4\n")
    a = doc.expression("a(c)").data
    npt.assert_allclose(doc.expression("adag(c)").data, a.conj().T)
    npt.assert_allclose(doc.expression("a(c)'").data, a.conj().T)
    npt.assert_allclose(doc.expression("(1+2i)*n(c) - 0.5i").data,
                        (1 + 2j) * a.conj().T @ a - 0.5j * np.eye(4))
    npt.assert_allclose(doc.expression("a(c)^2 / 2").data, a @ a / 2)
    npt.assert_allclose(doc.expression("sqrt(4) * i * id(c)").data, 2j * np.eye(4))
    npt.assert_allclose(doc.expression("exp(-i*pi*n(c))").data,
                        np.diag(np.exp(-1j * np.pi * np.arange(4))), atol=1e-12)


def test_literal_component_defaults():
    doc = parse_netlist("space c fock 3\ncomponent A { L=[a(c), 0] }\n")
    g = doc.components["A"].triple
    npt.assert_allclose(g.S.data[:, :, 0, 0], np.eye(2))
    npt.assert_allclose(g.H.data, 0)


def test_non_unitary_literal_fails_check():
    doc = parse_netlist((NETLISTS / "bad_unitary.net").read_text())
    diags, report = validate_document(doc)
    assert any(d.severity == "error" and "unitary" in d.message for d in diags)
    assert report[0]["unitarity_error"] > 0.1


def test_groups_and_couplings():
    text = """
space c1 fock 3
space c2 fock 3
component A = cavity(c1, 1, 0)
component B = cavity(c2, 1, 0)
component P = passthrough(1)
component Q = passthrough(1)
connect A + P -> B + Q
couple M=0.2*a(c1) N=a(c2)
"""
    doc = parse_netlist(text)
    assert list(doc.groups()) == ["A+P", "B+Q"]
    red = reduce(doc.network())
    assert red.n == 2
    assert red.triple.hermiticity_error() < 1e-14
    d = first_error(text + "connect A + Q -> B\n")
    assert "group" in d.message


def test_holevo_and_feedback_builtins():
    doc = parse_netlist("""
space c fock 3
component F = photon_feedback(0.3*n(c))
component G = holevo(0, 0.2*a(c)', 0.2*a(c), 0.3*n(c))
""")
    npt.assert_allclose(doc.components["F"].triple.S.data[0, 0],
                        doc.components["G"].triple.S.data[0, 0], atol=1e-12)


def test_classical_sde_registers_grid_space():
    doc = parse_netlist("component D = classical_sde(grid(-2, 2, 9), -x, 0.5, x)\n"
                        "state gaussian(D, 0, 0.4)\n")
    assert doc.registry["D"].dim == 9
    rho = doc.initial_state()
    assert rho.shape == (9, 9)
    assert np.trace(rho).real == pytest.approx(1.0)
    npt.assert_allclose(np.diag(doc.expression("q(D)").data).real, np.linspace(-2, 2, 9))


def test_bytes_input():
    assert parse_netlist(b"space c fock 2\n").registry["c"].dim == 2
    d = first_error(b"space c fock 2\n\xff\xfe")
    assert d.line == 2


def test_dimension_limits():
    assert "dimension" in first_error("space c fock 100000").message
    assert "total" in first_error("space a fock 100\nspace b fock 100\n").message


FRAGMENTS = ["space", "component", "connect", "couple", "state", "run", "fock", "dim",
             "cavity(", "beamsplitter(", "passthrough(", "holevo(", "classical_sde(", "grid(",
             "x", "a(c)", "adag(c)", "n(c)", "id(c)", "'", "^", "->", "{", "}", "[", "]", "(", ")",
             ",", "=", "S=", "L=", "H=", "0.2i", "i", "1e308", "-", "+", "*", "/", "0", "3", "\n",
             "#", "M", "C", "N", "c", "sqrt(", "exp(", "vacuum", "coherent(", "dt=", "1e-400", "99"]


def _mutants(rng: random.Random, base: str):
    r = rng.random()
    if r < 0.4:
        s = list(base)
        for _ in range(rng.randint(1, 5)):
            p = rng.randrange(len(s) + 1)
            if rng.random() < 0.5 and s:
                del s[max(p - 1, 0):p + rng.randint(0, 3)]
            else:
                s.insert(p, rng.choice(FRAGMENTS))
        return "".join(s)
    if r < 0.8:
        return " ".join(rng.choice(FRAGMENTS) for _ in range(rng.randint(0, 30)))
    return bytes(rng.randrange(256) for _ in range(rng.randint(0, 60)))


def run_fuzz(count: int, seed: int = 0) -> int:
    """Parse ``count`` random inputs; return how many raised something other than NetlistError."""
    base = (NETLISTS / "beamsplitter_cavity.net").read_text()
    rng = random.Random(seed)
    crashes = 0
    for _ in range(count):
        try:
            parse_netlist(_mutants(rng, base))
        except NetlistError:
            pass
        except Exception:
            crashes += 1
    return crashes


def test_fuzz_smoke():
    assert run_fuzz(500, seed=1) == 0


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet=st.sampled_from(list("space component connect couple state run"
                                             "0123456789.+-*/^()[]{},=' \n#ijxq")), max_size=80))
def test_parser_never_crashes(text):
    try:
        parse_netlist(text)
    except NetlistError as exc:
        assert all(d.line >= 1 and d.column >= 1 for d in exc.diagnostics)
