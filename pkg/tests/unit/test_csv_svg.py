import re

from monotone_peridynamics.schemas.enums import SolverPhase
from monotone_peridynamics.utils.csv_tables import write_csv
from monotone_peridynamics.utils.svg_plot import render_line_plot, write_line_plot


def test_csv_cells(tmp_path):
    path = write_csv(tmp_path / "out" / "table.csv", ["name", "value", "phase", "missing"],
                     [["a", 0.1, SolverPhase.FULL, None], ["b", 3, SolverPhase.SMALL_DEFORMATION, 0.5]])

    assert path.read_text() == ("name,value,phase,missing\n"
                                "a,0.10000000000000001,full,\n"
                                "b,3,small,0.5\n")


def test_csv_floats_round_trip(tmp_path):
    value = 2.0 / 3.0
    path = write_csv(tmp_path / "t.csv", ["x"], [[value]])

    assert float(path.read_text().splitlines()[1]) == value


def test_line_plot_has_one_polyline_per_series():
    svg = render_line_plot({"E_b": ([0.1, 0.05, 0.025], [1e-2, 2.5e-3, 6e-4]),
                            "E_u": ([0.1, 0.05, 0.025], [3e-2, 1e-2, 4e-3])},
                           title="convergence", log_x=True, log_y=True)

    assert svg.startswith("<svg")
    assert svg.rstrip().endswith("</svg>")
    assert svg.count("<polyline") == 2
    assert "convergence" in svg


def test_log_axes_drop_nonpositive_points():
    svg = render_line_plot({"E_k": ([0.1, 0.05, 0.025], [1e-2, 0.0, 1e-3])}, log_y=True)

    polyline = next(line for line in svg.splitlines() if line.startswith("<polyline"))
    assert len(polyline.split('points="')[1].split('"')[0].split()) == 2


def test_empty_plot_is_still_a_document():
    svg = render_line_plot({"E_k": ([0.1], [0.0])}, log_y=True)

    assert "<polyline" not in svg
    assert svg.rstrip().endswith("</svg>")


def test_written_plots_are_reproducible(tmp_path):
    series = {"train": ([0, 1, 2], [1.0, 0.5, 0.25])}
    first = write_line_plot(tmp_path / "a.svg", series, y_label="loss").read_bytes()
    second = write_line_plot(tmp_path / "b.svg", series, y_label="loss").read_bytes()

    assert first == second


def test_log_axis_ticks_are_whole_decades():
    svg = render_line_plot({"E_b": ([0.1, 0.05, 0.025], [1e-2, 2.5e-3, 6e-4])}, log_x=True, log_y=True)

    labels = re.findall(r'font-size="11">([^<]*)</text>', svg)
    assert "1e-3" in labels
    assert "1e-2" in labels
    assert not any(re.fullmatch(r"1e-?\d+\.\d+", label) for label in labels)


def test_log_axis_within_one_decade_labels_the_ends():
    svg = render_line_plot({"E_u": ([1, 2], [2e-3, 5e-3])}, log_y=True)

    labels = re.findall(r'font-size="11">([^<]*)</text>', svg)
    assert "0.002" in labels
    assert "0.005" in labels
