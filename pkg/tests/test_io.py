import io as stdio
import json

import numpy as np
import pytest

from denaturefit import io as dio
from denaturefit.confidence import fit_best, marginal_ci
from denaturefit.model import LemForm


def test_round_trip(center_set):
    text = dio.format_dataset(center_set.data, comment="m=6\nd50=4")
    back = dio.parse_dataset(text)
    np.testing.assert_array_equal(back.d, center_set.data.d)
    np.testing.assert_array_equal(back.signal, center_set.data.signal)


@pytest.mark.parametrize("text,line", [
    ("", None),
    ("# only a comment\n", None),
    ("x,y\n1,2\n", 1),
    ("denaturant,signal\n1,2,3\n", 2),
    ("denaturant,signal\n1,abc\n", 2),
    ("denaturant,signal\n-1,2\n", 2),
    ("denaturant,signal\n1,nan\n", 2),
])
def test_parse_errors(text, line):
    with pytest.raises(dio.ParseError) as info:
        dio.parse_dataset(text)
    assert info.value.line == line


def test_too_few_points():
    text = "denaturant,signal\n" + "".join(f"{i},1\n" for i in range(5))
    with pytest.raises(dio.ParseError):
        dio.parse_dataset(text)


def test_json_schema(tmp_path, center_set):
    fit = fit_best(center_set.data, LemForm.DG0_M)
    doc = dio.fit_report(fit, [marginal_ci(fit, 4)])
    path = tmp_path / "r.json"
    dio.write_json(path, doc)
    back = dio.read_json(path)
    assert back["schema_version"] == 1
    assert back["param_names"][4:] == ["dg0", "m"]
    assert np.allclose(back["covariance"], fit.covariance)
    path.write_text(json.dumps({"schema_version": 2}))
    with pytest.raises(dio.ParseError):
        dio.read_json(path)


def test_write_rows_to_stream():
    buf = stdio.StringIO()
    dio.write_rows(buf, [{"a": 0.1, "b": 2}])
    assert buf.getvalue() == "a,b\n0.1,2\n"
