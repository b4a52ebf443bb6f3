"""Chart renderer: file outputs, encodings, schema diagnostics."""

import importlib.util
import subprocess
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
RENDER_PY = ROOT / "figgen" / "render.py"

_spec = importlib.util.spec_from_file_location("figgen_render", RENDER_PY)
render_mod = importlib.util.module_from_spec(_spec)
_spec.loader.exec_module(render_mod)


HEADER = "experiment,method,param_bits,stat,metric,value"


def _sample_csv_text():
    lines = [HEADER]
    for param, mean, med, q25, q75 in [(1.0, 2.0, 1.5, 1.0, 3.0), (2.0, 4.1, 3.0, 2.0, 6.0)]:
        for method, scale in [("GPRS", 1.0), ("PFR", 1.3)]:
            lines += [
                f"MiSweep,{method},{param},mean,steps,{mean * scale}",
                f"MiSweep,{method},{param},median,steps,{med * scale}",
                f"MiSweep,{method},{param},q25,steps,{q25 * scale}",
                f"MiSweep,{method},{param},q75,steps,{q75 * scale}",
                f"MiSweep,{method},{param},mean,codelength_bits,{2.5 * scale + param}",
                f"MiSweep,{method},{param},median,codelength_bits,{2.0 * scale + param}",
                f"MiSweep,{method},{param},q25,codelength_bits,{1.5 * scale + param}",
                f"MiSweep,{method},{param},q75,codelength_bits,{3.5 * scale + param}",
                f"MiSweep,{method},{param},mean,censored_frac,0.0",
            ]
        lines.append(f"MiSweep,MI,{param},ref,codelength_bits,{param}")
        lines.append(f"MiSweep,UB+2,{param},ref,codelength_bits,{param + 3.0}")
    return "\n".join(lines) + "\n"


@pytest.fixture
def sample_csv(tmp_path):
    path = tmp_path / "bench.csv"
    path.write_text(_sample_csv_text())
    return path


def test_render_writes_png_and_svg_per_chart(sample_csv, tmp_path):
    out = tmp_path / "charts"
    written = render_mod.render(sample_csv, out)
    expected = {
        f"MiSweep_{metric}.{ext}"
        for metric in ("steps", "codelength_bits", "censored_frac")
        for ext in ("png", "svg")
    }
    assert {Path(p).name for p in written} == expected
    for p in written:
        assert Path(p).stat().st_size > 0


def test_render_is_rerunnable(sample_csv, tmp_path):
    out = tmp_path / "charts"
    first = set(render_mod.render(sample_csv, out))
    second = set(render_mod.render(sample_csv, out))
    assert first == second


def test_legend_contains_method_and_reference_tags(sample_csv):
    rows = render_mod._read_rows(sample_csv)
    figures = render_mod.build_figures(rows)
    fig = figures[("MiSweep", "codelength_bits")]
    labels = {t.get_text() for t in fig.axes[0].get_legend().get_texts()}
    assert {"GPRS", "PFR", "MI", "UB+2"} <= labels


def test_mean_median_band_encodings(sample_csv):
    rows = render_mod._read_rows(sample_csv)
    fig = render_mod.build_figures(rows)[("MiSweep", "steps")]
    ax = fig.axes[0]
    styles = {line.get_linestyle() for line in ax.get_lines()}
    assert "--" in styles  # mean
    assert "-" in styles  # median
    assert ax.collections  # 25-75% shaded band


def test_missing_column_diagnostic(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("experiment,method,param_bits,stat,value\nMiSweep,GPRS,1.0,mean,2.0\n")
    with pytest.raises(render_mod.InputError, match="metric"):
        render_mod.render(path, tmp_path / "charts")
    assert not (tmp_path / "charts").exists()


def test_empty_csv_is_a_clean_error(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text(HEADER + "\n")
    with pytest.raises(render_mod.InputError, match="no data rows"):
        render_mod.render(path, tmp_path / "charts")
    assert not (tmp_path / "charts").exists()


def test_headerless_csv_is_a_clean_error(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(render_mod.InputError, match="empty"):
        render_mod.render(path, tmp_path / "charts")
    assert not (tmp_path / "charts").exists()


def test_bad_number_diagnostic_names_the_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(HEADER + "\nMiSweep,GPRS,one,mean,steps,2.0\n")
    with pytest.raises(render_mod.InputError, match=":2"):
        render_mod.render(path, tmp_path / "charts")


def test_main_exit_codes(sample_csv, tmp_path, capsys):
    assert render_mod.main([str(sample_csv)]) == 2
    assert "usage" in capsys.readouterr().err
    assert render_mod.main([str(sample_csv), str(tmp_path / "charts")]) == 0
    assert capsys.readouterr().out.count("MiSweep_") == 6
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n")
    assert render_mod.main([str(bad), str(tmp_path / "charts2")]) == 2
    assert "missing columns" in capsys.readouterr().err


def test_script_invocation(sample_csv, tmp_path):
    proc = subprocess.run(
        [sys.executable, str(RENDER_PY), str(sample_csv), str(tmp_path / "charts")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert (tmp_path / "charts" / "MiSweep_steps.png").exists()
