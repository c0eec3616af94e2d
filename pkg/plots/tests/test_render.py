import pytest

from commcs_plots import FigureSpec, SchemaError, render
from commcs_plots.cli import main

VARIANCE_HEADER = (
    "schema,config_hash,seed,p,trials,replicas,sigma,mean_plain,var_plain,"
    "var_plain_analytic,mean_commcs,var_commcs,refinement_rate,coefficient_histogram"
)


def variance_csv(tmp_path):
    rows = [
        f"variance_sweep/1,abc,0,{p},{n},1000,0.1,{p},{p*(1-p)/n},{p*(1-p)/n},{p},{0.85*p*(1-p)/n},0.9,0.9:900"
        for p in (0.2, 0.5, 0.8)
        for n in (8, 16)
    ]
    path = tmp_path / "variance_sweep.csv"
    path.write_text(VARIANCE_HEADER + "\n" + "\n".join(rows) + "\n")
    return path


def bias_csv(tmp_path):
    path = tmp_path / "unbiasedness.csv"
    lines = ["schema,mode,z"] + [
        f"unbiasedness/1,dynamic,{z}" for z in (-2.1, -0.5, 0.0, 0.4, 1.8)
    ]
    path.write_text("\n".join(lines) + "\n")
    return path


def bon_csv(tmp_path):
    path = tmp_path / "bon.csv"
    lines = ["schema,config_hash,seed,scorer,n,success_rate"]
    for seed in (0, 1):
        for n, oracle, verifier in ((8, 0.6, 0.5), (16, 0.8, 0.6), (32, 0.9, 0.7)):
            lines.append(f"bon/1,abc,{seed},oracle,{n},{oracle}")
            lines.append(f"bon/1,abc,{seed},verifier,{n},{verifier}")
    path.write_text("\n".join(lines) + "\n")
    return path


def ablation_csv(tmp_path):
    path = tmp_path / "coefficient_ablation.csv"
    lines = ["schema,seed,setting,label_mae_refined"]
    for seed in (0, 1):
        for setting, mae in (("static:0.9", 0.09), ("static:1.0", 0.1), ("dynamic", 0.085)):
            lines.append(f"coefficient_ablation/1,{seed},{setting},{mae}")
    path.write_text("\n".join(lines) + "\n")
    return path


BUILDERS = {
    "variance_curve": variance_csv,
    "bias_hist": bias_csv,
    "bon_curve": bon_csv,
    "ablation_bars": ablation_csv,
}


@pytest.mark.parametrize("kind", sorted(BUILDERS))
def test_each_kind_renders(tmp_path, kind):
    source = BUILDERS[kind](tmp_path)
    out = tmp_path / f"{kind}.png"
    render(FigureSpec((str(source),), kind, str(out)))
    assert out.exists() and out.stat().st_size > 0
    # rendering must not mutate its input
    assert source.read_text() == BUILDERS[kind](tmp_path).read_text()


def test_rendering_is_deterministic(tmp_path):
    source = bon_csv(tmp_path)
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    render(FigureSpec((str(source),), "bon_curve", str(a)))
    render(FigureSpec((str(source),), "bon_curve", str(b)))
    assert a.read_bytes() == b.read_bytes()


def test_missing_columns_fail_with_expected_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("scorer,n\noracle,8\n")
    out = tmp_path / "fig.png"
    with pytest.raises(SchemaError) as err:
        render(FigureSpec((str(path),), "bon_curve", str(out)))
    assert "success_rate" in str(err.value)
    assert "['scorer', 'n', 'success_rate']" in str(err.value)
    assert not out.exists()


def test_empty_rows_fail_without_output(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("schema,mode,z\n")
    out = tmp_path / "fig.png"
    with pytest.raises(SchemaError):
        render(FigureSpec((str(path),), "bias_hist", str(out)))
    assert not out.exists()


def test_spec_validation(tmp_path):
    with pytest.raises(ValueError):
        FigureSpec(("x.csv",), "pie", "out.png")
    with pytest.raises(ValueError):
        FigureSpec((), "bon_curve", "out.png")


def test_multiple_inputs_are_pooled(tmp_path):
    first = bias_csv(tmp_path)
    second = tmp_path / "more.csv"
    second.write_text("schema,mode,z\nunbiasedness/1,dynamic,3.0\n")
    out = tmp_path / "pooled.png"
    render(FigureSpec((str(first), str(second)), "bias_hist", str(out)))
    assert out.exists()


def test_cli_success_and_exit_codes(tmp_path):
    source = bon_csv(tmp_path)
    out = tmp_path / "cli.png"
    assert main(["--kind", "bon_curve", "--input", str(source), "--out", str(out)]) == 0
    assert out.exists()

    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    assert main(["--kind", "bon_curve", "--input", str(bad), "--out", str(out)]) == 2
    assert (
        main(
            ["--kind", "bon_curve", "--input", str(tmp_path / "nope.csv"), "--out", str(out)]
        )
        == 3
    )
