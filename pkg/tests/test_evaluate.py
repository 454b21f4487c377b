import numpy as np
import pytest

from predkit.dataset import Polarity, build_label_matrix
from predkit.errors import MissingPredictionError, SchemaError
from predkit.metrics import (
    PredicateEvalSet,
    evaluate,
    pdd,
    pdo,
    predicate_auc,
    rank_predicates,
)

from conftest import make_dataset, make_image, make_matrix, make_predictions, random_dataset

N = 8  # matches conftest PREDICATE_CLASSES


def one_hot(p, value, base=0.0):
    scores = [base] * N
    scores[p] = value
    return scores


class TestEvaluate:
    def test_mean_of_two_aucs(self, categories):
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
                ]
            },
        )
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
                    },
                )
            },
        )
        report = evaluate(dataset, preds, ks=(1,))
        by_id = {row.predicate_id: row for row in report.rows}
        assert by_id[2].p_auc == 1.0
        assert by_id[3].p_auc == 0.5
        assert report.mean_row["p_auc"] == pytest.approx(0.75)

    def test_only_negative_predicate_is_excluded_with_support_counts(self, categories):
        img = make_image("a", [0, 1, 2])
        dataset = make_dataset(
            categories,
            [img],
            {
                "a": [
                    (0, 1, 2, Polarity.POSITIVE),
                    (1, 2, 2, Polarity.NEGATIVE),
                    (0, 2, 5, Polarity.NEGATIVE),
                ]
            },
        )
        preds = make_predictions(
            N,
            {
                "a": make_matrix(
                    "a",
                    N,
                    {(0, 1): one_hot(2, 1.0), (1, 2): one_hot(2, -1.0), (0, 2): one_hot(5, 1.0)},
                )
            },
        )
        report = evaluate(dataset, preds, ks=(5,))
        by_id = {row.predicate_id: row for row in report.rows}
        assert by_id[5].included is False
        assert by_id[5].positives == 0 and by_id[5].negatives == 1
        assert by_id[5].p_auc is None and by_id[5].pdd is None and by_id[5].pdo is None
        assert by_id[2].included is True
        assert [row.predicate_id for row in report.included_rows] == [2]

    def test_rows_sorted_by_predicate_id(self, categories):
        img = make_image("a", [0, 1, 2])
        dataset = make_dataset(
            categories,
            [img],
            {
                "a": [
                    (0, 1, 7, Polarity.POSITIVE),
                    (1, 2, 7, Polarity.NEGATIVE),
                    (1, 0, 1, Polarity.POSITIVE),
                    (2, 1, 1, Polarity.NEGATIVE),
                ]
            },
        )
        rows = {
            (0, 1): one_hot(7, 1.0),
            (1, 2): one_hot(7, 0.5),
            (1, 0): one_hot(1, 1.0),
            (2, 1): one_hot(1, 0.5),
        }
        preds = make_predictions(N, {"a": make_matrix("a", N, rows)})
        report = evaluate(dataset, preds, ks=(5,))
        assert [row.predicate_id for row in report.rows] == [1, 7]

    def test_strict_mode_raises_on_missing_row(self, categories):
        img = make_image("a", [0, 1])
        dataset = make_dataset(categories, [img], {"a": [(0, 1, 2, Polarity.POSITIVE)]})
        preds = make_predictions(N, {})
        with pytest.raises(MissingPredictionError):
            evaluate(dataset, preds, ks=(5,))

    def test_lenient_mode_scores_missing_rows_worst(self, categories):
        img = make_image("a", [0, 1, 2])
        dataset = make_dataset(
            categories,
            [img],
            {
                "a": [
                    (0, 1, 2, Polarity.POSITIVE),  # has a row, confidence 0.9
                    (1, 2, 2, Polarity.POSITIVE),  # missing row -> -inf
                    (2, 0, 2, Polarity.NEGATIVE),  # has a row, confidence 0.5
                ]
            },
        )
        preds = make_predictions(
            N,
            {"a": make_matrix("a", N, {(0, 1): one_hot(2, 0.9), (2, 0): one_hot(2, 0.5)})},
        )
        report = evaluate(dataset, preds, ks=(5,), strict=False)
        row = {r.predicate_id: r for r in report.rows}[2]
        # one positive above the negative, one at -inf below it
        assert row.p_auc == pytest.approx(0.5)
        # missing row ranks by index: predicate 2 gets rank 2
        assert row.pdd == pytest.approx(pdd(
            PredicateEvalSet.from_entries([(1, 0.9, 0), (1, -np.inf, 2), (-1, 0.5, 0)]), N
        ))

    def test_predicate_count_mismatch_rejected(self, categories):
        dataset = make_dataset(categories, [make_image("a", [0, 1])], {})
        preds = make_predictions(N + 1, {})
        with pytest.raises(SchemaError):
            evaluate(dataset, preds, ks=(5,))

    def test_report_composes_from_individual_operations(self, categories):
        rng = np.random.default_rng(59)
        dataset = random_dataset(rng, num_images=5)
        matrices = {}
        for img in dataset.images:
            pairs = set(build_label_matrix(dataset, img.image_id))
            # cover annotated pairs plus some noise rows
            pairs |= {(0, 1)} if len(img.objects) >= 2 else set()
            if not pairs:
                continue
            rows = {pair: rng.normal(size=N).tolist() for pair in pairs}
            matrices[img.image_id] = make_matrix(img.image_id, N, rows)
        preds = make_predictions(N, matrices)
        report = evaluate(dataset, preds, ks=(3, 10))

        # recompose each included row's metrics straight from the base ops
        entries: dict[int, list[tuple[int, float, int]]] = {}
        for img in dataset.images:
            matrix = matrices.get(img.image_id)
            index = matrix.row_index() if matrix else {}
            for pair, lvec in build_label_matrix(dataset, img.image_id).items():
                row = index[pair]
                ranks = rank_predicates(matrix.scores[row])
                for p in np.nonzero(lvec)[0]:
                    entries.setdefault(int(p), []).append(
                        (int(lvec[p]), float(matrix.scores[row][p]), int(ranks[p]))
                    )
        for row in report.rows:
            es = PredicateEvalSet.from_entries(entries[row.predicate_id])
            assert row.positives == es.num_positive
            assert row.negatives == es.num_negative
            if row.included:
                assert row.p_auc == pytest.approx(predicate_auc(es), abs=1e-12)
                assert row.pdd == pytest.approx(pdd(es, N), abs=1e-12)
                assert row.pdo == pytest.approx(pdo(es, N), abs=1e-12)

    def test_mean_row_recomputable_from_rows(self, categories):
        rng = np.random.default_rng(61)
        dataset = random_dataset(rng, num_images=6)
        matrices = {}
        for img in dataset.images:
            pairs = set(build_label_matrix(dataset, img.image_id))
            if not pairs:
                continue
            matrices[img.image_id] = make_matrix(
                img.image_id, N, {pair: rng.normal(size=N).tolist() for pair in pairs}
            )
        report = evaluate(dataset, make_predictions(N, matrices), ks=(2, 7))
        included = report.included_rows
        if included:
            for column in ("p_auc", "pdd", "pdo"):
                expected = float(np.mean([getattr(r, column) for r in included]))
                assert report.mean_row[column] == pytest.approx(expected, abs=1e-12)
            for k in report.ks:
                values = [r.recall[k] for r in included if r.recall[k] is not None]
                if values:
                    assert report.mean_row["recall"][k] == pytest.approx(
                        float(np.mean(values)), abs=1e-12
                    )
