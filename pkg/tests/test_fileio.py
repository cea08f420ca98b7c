import json

import numpy as np
import pytest

from orthocal import (
    CalibrationReport,
    Geometry,
    InputError,
    ReducedMeasurements,
    fixture_path,
    load_fixture,
    load_measurement_file,
    measurement_to_dict,
    parse_measurement,
    predict_double_posture,
    predict_single_posture,
    reduce,
    write_measurement_file,
)
from orthocal.fileio import FIXTURE_NAMES, WIRE_KEYS

from conftest import TABLE4


def _reduced_doc(values=None, **overrides):
    doc = {
        "schema_version": 1,
        "units": "mm",
        "method": "double-reduced",
        "values": dict(values or TABLE4[2]),
    }
    doc.update(overrides)
    return doc


class TestFixtures:
    def test_all_fixtures_load(self):
        assert FIXTURE_NAMES == ("experiment1", "experiment2", "experiment3")
        for idx, name in enumerate(FIXTURE_NAMES, start=1):
            mf, digest = load_fixture(name)
            assert mf.method == "double-reduced"
            assert mf.values == TABLE4[idx]
            assert len(digest) == 64
            assert mf.comment

    def test_fixture_measurement_type(self):
        mf, _ = load_fixture("experiment2")
        m = mf.measurement()
        assert isinstance(m, ReducedMeasurements)
        assert m.dz_x == pytest.approx(-1.14)

    def test_unknown_fixture(self):
        with pytest.raises(InputError):
            fixture_path("experiment9")


class TestParsing:
    def test_valid_document(self):
        mf = parse_measurement(_reduced_doc())
        assert mf.method == "double-reduced"
        assert mf.geometry is None

    def test_missing_keys_named(self):
        doc = _reduced_doc()
        del doc["values"]["dz_x"]
        del doc["values"]["dx_y"]
        with pytest.raises(InputError, match="dx_y, dz_x"):
            parse_measurement(doc)

    def test_unknown_keys_named(self):
        doc = _reduced_doc()
        doc["values"]["dq_w"] = 1.0
        with pytest.raises(InputError, match="dq_w"):
            parse_measurement(doc)

    def test_wrong_units(self):
        with pytest.raises(InputError, match="units"):
            parse_measurement(_reduced_doc(units="inch"))

    def test_wrong_schema(self):
        with pytest.raises(InputError, match="schema_version"):
            parse_measurement(_reduced_doc(schema_version=2))

    def test_unknown_method(self):
        with pytest.raises(InputError, match="method"):
            parse_measurement(_reduced_doc(method="triple"))

    def test_non_finite_value(self):
        doc = _reduced_doc()
        doc["values"]["dx_y"] = float("inf")
        with pytest.raises(InputError, match="dx_y"):
            parse_measurement(doc)

    def test_non_numeric_value(self):
        doc = _reduced_doc()
        doc["values"]["dx_y"] = "big"
        with pytest.raises(InputError, match="dx_y"):
            parse_measurement(doc)

    def test_repetitions_are_averaged(self):
        doc = _reduced_doc()
        del doc["values"]["dx_y"]
        doc["repetitions"] = {"dx_y": [-0.40, -0.43, -0.46]}
        mf = parse_measurement(doc)
        assert mf.values["dx_y"] == pytest.approx(-0.43)

    def test_repetition_value_clash(self):
        doc = _reduced_doc()
        doc["repetitions"] = {"dx_y": [-0.43]}
        with pytest.raises(InputError, match="dx_y"):
            parse_measurement(doc)

    def test_empty_repetition_array(self):
        doc = _reduced_doc()
        del doc["values"]["dx_y"]
        doc["repetitions"] = {"dx_y": []}
        with pytest.raises(InputError, match="dx_y"):
            parse_measurement(doc)

    def test_geometry_override(self):
        doc = _reduced_doc(geometry={"L": 300.0, "rho_min": -90.0, "rho_max": 50.0})
        mf = parse_measurement(doc)
        assert mf.geometry == Geometry(L=300.0, rho_min=-90.0, rho_max=50.0)

    def test_geometry_missing_field(self):
        with pytest.raises(InputError, match="rho_max"):
            parse_measurement(_reduced_doc(geometry={"L": 300.0, "rho_min": -90.0}))

    def test_single_posture_keys(self, geom):
        m = predict_single_posture([0.1, 0.2, -0.1], geom)
        doc = measurement_to_dict(m)
        assert doc["method"] == "single-posture"
        assert tuple(doc["values"]) == WIRE_KEYS["single-posture"]
        parsed = parse_measurement(doc)
        assert parsed.measurement() == m


class TestSerialization:
    @pytest.mark.parametrize("shape", ["single", "double", "reduced"])
    def test_round_trip(self, geom, shape, tmp_path):
        dr = [0.3, -0.2, 0.5]
        if shape == "single":
            m = predict_single_posture(dr, geom)
        elif shape == "double":
            m = predict_double_posture(dr, geom)
        else:
            m = reduce(predict_double_posture(dr, geom))
        doc = measurement_to_dict(m, geometry=geom, comment="round trip")
        path = tmp_path / "m.json"
        write_measurement_file(path, doc)
        mf, digest = load_measurement_file(path)
        assert mf.measurement() == m
        assert mf.geometry == geom
        assert mf.comment == "round trip"
        assert len(digest) == 64

    def test_write_is_deterministic(self, geom, tmp_path):
        m = reduce(predict_double_posture([1, 1, 1], geom))
        doc = measurement_to_dict(m, simulation={"seed": 3})
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        write_measurement_file(a, doc)
        write_measurement_file(b, doc)
        assert a.read_bytes() == b.read_bytes()

    def test_corrupt_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(InputError):
            load_measurement_file(path)


class TestCalibrationReport:
    def _report(self):
        return CalibrationReport(
            input_digest="ab" * 32,
            method="linear6",
            offsets={"d_rho_x": -0.52, "d_rho_y": 0.6, "d_rho_z": -1.76},
            residuals={"dx_y": -0.28, "dx_z": 0.25, "dy_x": 0.21,
                       "dy_z": -0.14, "dz_x": -0.13, "dz_y": 0.09},
            residual_rms=0.195,
            sigma_hat=0.276,
            sigma_rho=0.548,
            iterations=0,
            converged=True,
            gradient_norm=1e-16,
        )

    def test_json_round_trip_identical(self):
        rep = self._report()
        back = CalibrationReport.from_dict(json.loads(rep.to_json()))
        assert back == rep

    def test_exact_float_round_trip(self):
        rep = self._report()
        doc = json.loads(rep.to_json())
        assert doc["sigma_hat"] == rep.sigma_hat
        assert doc["offsets"]["d_rho_x"] == rep.offsets["d_rho_x"]

    def test_schema_stability(self):
        doc = self._report().to_dict()
        assert doc["schema_version"] == 1
        doc["surprise"] = 1
        with pytest.raises(InputError, match="surprise"):
            CalibrationReport.from_dict(doc)
        del doc["surprise"]
        del doc["sigma_rho"]
        with pytest.raises(InputError, match="sigma_rho"):
            CalibrationReport.from_dict(doc)

    def test_future_schema_rejected(self):
        doc = self._report().to_dict()
        doc["schema_version"] = 99
        with pytest.raises(InputError, match="schema_version"):
            CalibrationReport.from_dict(doc)


class TestMeasurementDictLayout:
    def test_wire_key_order(self, geom):
        m = reduce(predict_double_posture([0.5, 0.5, 0.5], geom))
        doc = measurement_to_dict(m)
        assert tuple(doc["values"].keys()) == ("dx_y", "dx_z", "dy_x", "dy_z", "dz_x", "dz_y")

    def test_values_match_fields(self, geom):
        m = reduce(predict_double_posture([0.5, -0.5, 0.25], geom))
        doc = measurement_to_dict(m)
        assert doc["values"]["dz_x"] == m.dz_x
        assert doc["values"]["dx_y"] == m.dx_y
        assert doc["units"] == "mm"
        arr = np.array([doc["values"][k] for k in ("dx_y", "dy_x", "dy_z", "dz_y", "dx_z", "dz_x")])
        np.testing.assert_allclose(arr, m.as_array(), atol=0)
