import io

import pytest

from cosetshift.cli import main
from cosetshift.errors import SectionInvalidError, SpecSyntaxError, UnresolvedReferenceError
from cosetshift.gallery import GALLERY, spec_text
from cosetshift.report import Flags, run
from cosetshift.specfile import parse_spec, render

SPECS = sorted(GALLERY)


@pytest.mark.parametrize("name", SPECS)
def test_bundled_specs_round_trip(name):
    spec = parse_spec(spec_text(name))
    again = parse_spec(render(spec))
    assert render(again) == render(spec)
    entry = GALLERY[name]
    assert entry.section in spec.objects


def test_parse_small_spec():
    text = """
# two-element group written out
[group z2]
elements = e x
table =
    e x
    x e

[group_shift g]
group = z2
edges = e->e, e->x, x->e, x->x
"""
    spec = parse_spec(text)
    m = spec.objects["g"]
    assert m.f_e.order == 2
    assert [s.name for s in spec.of_kind("group_shift")] == ["g"]


@pytest.mark.parametrize("text, err, line", [
    ("[group z2]\nelements = e x\ntable =\n    e x\n    x x\n", SectionInvalidError, 1),
    ("[group_shift g]\ngroup = nowhere\nfull = yes\n", UnresolvedReferenceError, 2),
    ("[group z2]\ncyclic_sum = 2\n[group_shift g]\ngroup = z2\nedges = 0->1\n", SectionInvalidError, 3),
    ("[mystery x]\nfoo = 1\n", SpecSyntaxError, 1),
    ("[group z2]\njust some words\n", SpecSyntaxError, 2),
    ("[group z2]\ncyclic_sum = 2\n[group z2]\ncyclic_sum = 3\n", SpecSyntaxError, 3),
])
def test_errors_carry_positions(text, err, line):
    with pytest.raises(err) as info:
        parse_spec(text)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}")


def test_bad_rule_points_at_its_line():
    text = "[generated_graph g]\nclass = Q(k, n) norm k\nrule = r: Q(k, n) -> Q(k*n, n)\nbase = Q(0, 0)\n"
    with pytest.raises(SpecSyntaxError) as info:
        parse_spec(text)
    assert (info.value.line, info.value.column) == (3, 8)
    assert "not affine" in str(info.value)


@pytest.mark.parametrize("op, name", [
    ("decompose", "sigma_a"), ("decompose", "full_shift_s3"), ("decompose", "dlim_3adic_truncation"),
    ("validate", "sigma_a"), ("validate", "z2_matrix"), ("validate", "q3xq3"),
    ("classify", "cycle_plus_q3"), ("classify", "q3xq3"), ("entropy", "q3xq3"), ("entropy", "q3"),
    ("export-dot", "q3"), ("export-dot", "sigma_a"),
])
def test_reports_are_deterministic(op, name):
    text = spec_text(name)
    a = run(op, text, Flags()).render()
    b = run(op, text, Flags()).render()
    assert a == b
    assert "status" in a


def test_cli_exit_codes(tmp_path, capsys, monkeypatch):
    spec = tmp_path / "sigma.spec"
    spec.write_text(spec_text("sigma_a"))
    assert main(["decompose", str(spec)]) == 0
    out = capsys.readouterr().out
    assert "emitted" in out and "2,2" in out

    assert main(["decompose", str(tmp_path / "missing.spec")]) == 2
    bad = tmp_path / "bad.spec"
    bad.write_text("[group z2]\nnonsense\n")
    assert main(["validate", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err

    monkeypatch.setattr("sys.stdin", io.StringIO(spec_text("q3")))
    assert main(["entropy", "-", "--format", "machine"]) == 0
    out = capsys.readouterr().out
    assert "forward_counts=1,1,1" in out


CYCLE = """[generated_graph cyc]
class = C(i)
rule = step: C(i) -> C(i + 1) when 0 <= i <= 2
rule = wrap: C(i) -> C(i - 3) when i == 3
base = C(0)
"""


def test_cli_fail_exit_code(tmp_path, capsys):
    # a lone 4-cycle is not totally wandering, so the entropy report fails
    path = tmp_path / "cyc.spec"
    path.write_text(CYCLE + "rank = C: 0\nexceptions = C(0), C(1), C(2), C(3)\n")
    assert main(["entropy", str(path)]) == 1
    out = capsys.readouterr().out
    assert "COUNTEREXAMPLE" in out and out.rstrip().endswith("FAIL")
    # a rank that jumps back along the wrap rule is rejected outright
    path.write_text(CYCLE + "rank = C: i\n")
    assert main(["classify", str(path)]) == 2


def test_cli_writes_outputs(tmp_path, capsys):
    spec = tmp_path / "q.spec"
    spec.write_text(spec_text("cycle_plus_q3"))
    dot = tmp_path / "g.dot"
    assert main(["export-dot", str(spec), "--out", str(dot)]) == 0
    first = dot.read_text()
    assert first.startswith('digraph "cycle4+q3"')
    assert "palegreen" in first and "doublecircle" in first
    assert main(["export-dot", str(spec), "--out", str(dot)]) == 0
    assert dot.read_text() == first

    report = tmp_path / "r.txt"
    assert main(["classify", str(spec), "--out", str(report), "--radius", "2"]) == 0
    assert "quotient_verdict" in report.read_text()

    outdir = tmp_path / "ex"
    assert main(["examples", "--out", str(outdir)]) == 0
    assert sorted(p.stem for p in outdir.glob("*.spec")) == SPECS
    capsys.readouterr()
    assert main(["examples", "q3"]) == 0
    assert "[generated_graph q3]" in capsys.readouterr().out


def test_section_flag(tmp_path, capsys):
    spec = tmp_path / "d.spec"
    spec.write_text(spec_text("dlim_3adic_truncation"))
    assert main(["decompose", str(spec), "--section", "dlim"]) == 0
    assert main(["decompose", str(spec), "--section", "z3z9"]) == 2
    assert main(["decompose", str(spec), "--section", "nope"]) == 2


def test_dot_helpers(tmp_path):
    from cosetshift.dot import export_dot, shift_to_dot
    from cosetshift.gallery import sigma_a

    m = sigma_a()
    text = export_dot(m.shift, tmp_path / "s.dot", name="sigma")
    assert text == shift_to_dot(m.shift, "sigma")
    assert text.count("->") == 32
    assert '"0.0" [label="0.0\\nf=4 p=4"];' in text
    with pytest.raises(TypeError):
        export_dot(object(), tmp_path / "x.dot")


def test_empty_spec_is_a_syntax_error():
    with pytest.raises(SpecSyntaxError):
        parse_spec("")
    with pytest.raises(SpecSyntaxError):
        parse_spec("# only a comment\n\n")


def test_trivial_group_validates():
    text = "[group one]\nelements = e\ntable =\n    e\n\n[group_shift g]\ngroup = one\nfull = yes\n"
    rep = run("validate", text, Flags())
    assert rep.render().rstrip().endswith("PASS")
    assert run("decompose", text, Flags()).render().rstrip().endswith("PASS")


LONE = """[generated_graph lone]
class = P(i) norm i
rule = stay: P(i) -> P(i) when i == 0
base = P(0)
fixed = P(0)
rank = P: 0
"""


def test_single_fixed_state_exports_one_loop():
    rep = run("export-dot", LONE, Flags())
    text = rep.attachment
    assert text.count("[label=") == 1 and text.count("->") == 1
    assert '"P(0)" -> "P(0)";' in text
    assert "graph_source" in rep.render()
