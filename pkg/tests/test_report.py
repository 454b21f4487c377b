import csv
import json

import pytest

from predkit.dataset import Polarity
from predkit.metrics import evaluate
from predkit.report import format_table, render_figures, report_to_dict, write_csv, write_report_files

from conftest import make_dataset, make_image, make_matrix, make_predictions

N = 8


@pytest.fixture
def report(categories):
    img = make_image("a", [0, 1, 2, 3])
    dataset = make_dataset(
        categories,
        [img],
        {
            "a": [
                (0, 1, 2, Polarity.POSITIVE),
                (1, 2, 2, Polarity.NEGATIVE),
                (2, 3, 3, Polarity.POSITIVE),
                (0, 2, 3, Polarity.NEGATIVE),
                (0, 3, 5, Polarity.NEGATIVE),  # negatives only: excluded row
            ]
        },
    )
    def one_hot(p, v):
        row = [0.0] * N
        row[p] = v
        return row

    preds = make_predictions(
        N,
        {
            "a": make_matrix(
                "a",
                N,
                {
                    (0, 1): one_hot(2, 0.9),
                    (1, 2): one_hot(2, 0.1),
                    (2, 3): one_hot(3, 0.5),
                    (0, 2): one_hot(3, 0.5),
                    (0, 3): one_hot(5, 0.7),
                },
            )
        },
    )
    return evaluate(dataset, preds, ks=(1, 5))


class TestTable:
    def test_column_order_and_mean_row(self, report):
        table = format_table(report)
        lines = table.splitlines()
        assert lines[0].split() == ["Predicate", "P-AUC", "PDD", "PDO", "R@1", "R@5", "Pos", "Neg"]
        mean_line = [line for line in lines if line.startswith("mean")]
        assert len(mean_line) == 1
        assert "0.7500" in mean_line[0]

    def test_excluded_rows_marked(self, report):
        table = format_table(report)
        row = next(line for line in table.splitlines() if line.startswith("drinking"))
        assert "*" in row and " - " in f"{row} "

    def test_empty_report_renders(self, categories):
        dataset = make_dataset(categories, [make_image("a", [0, 1])], {})
        preds = make_predictions(N, {})
        table = format_table(evaluate(dataset, preds, ks=(5,)))
        assert "mean" in table


class TestStructuredOutputs:
    def test_dict_round_trips_through_json(self, report):
        payload = json.loads(json.dumps(report_to_dict(report)))
        assert payload["ks"] == [1, 5]
        included = [r for r in payload["rows"] if r["included"]]
        assert {r["predicate"] for r in included} == {"riding", "eating"}
        assert payload["mean"]["p_auc"] == pytest.approx(0.75)
        excluded = [r for r in payload["rows"] if not r["included"]]
        assert excluded[0]["p_auc"] is None
        assert excluded[0]["negatives"] == 1

    def test_csv_contains_all_rows_and_mean(self, report, tmp_path):
        path = tmp_path / "report.csv"
        write_csv(report, path)
        with open(path, newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0][:4] == ["predicate", "p_auc", "pdd", "pdo"]
        assert rows[-1][0] == "mean"
        assert len(rows) == 1 + len(report.rows) + 1


class TestFigures:
    def test_figures_rendered(self, report, tmp_path):
        paths = render_figures(report, tmp_path)
        names = {p.name for p in paths}
        assert {"predicate_auc.png", "displacement.png", "recall.png", "support.png"} <= names
        for p in paths:
            assert p.stat().st_size > 1000

    def test_no_figures_without_included_rows(self, categories, tmp_path):
        dataset = make_dataset(categories, [make_image("a", [0, 1])], {})
        report = evaluate(dataset, make_predictions(N, {}), ks=(5,))
        assert render_figures(report, tmp_path) == []

    def test_write_report_files_bundle(self, report, tmp_path):
        written = write_report_files(report, tmp_path / "out")
        assert written["table"].exists()
        assert written["csv"].exists()
        assert written["json"].exists()
        assert len(written["figures"]) >= 3
