import json
import math

import numpy as np
import pytest

from uwkb.geometry import ProblemSpec
from uwkb.validate import (FitReport, cone_test, log_fit, order_fit,
                           residual_scan, scenario_library, sho_log_check,
                           trace_to_csv)


class TestOrderFit:
    def test_recovers_power_law(self):
        hs = np.geomspace(1e-1, 1e-3, 9)
        rep = order_fit(hs, 3.0 * hs ** 2)
        assert rep.model == "power"
        assert rep.params["p"] == pytest.approx(2.0, abs=1e-8)
        assert rep.params["a"] == pytest.approx(3.0, rel=1e-6)

    def test_detects_log_factor(self):
        hs = np.geomspace(1e-2, 1e-5, 13)
        errs = hs ** 2 * np.log(1.0 / hs)
        rep = order_fit(hs, errs)
        assert rep.model == "power-log"
        assert rep.params["q"] == 1
        assert rep.params["p"] == pytest.approx(2.0, abs=1e-8)

    def test_noise_floor_excluded(self):
        hs = np.geomspace(1e-1, 1e-3, 9)
        errs = 1.0 * hs ** 3
        errs[hs < 5e-3] = 1e-14          # saturated samples
        rep = order_fit(hs, errs, floor=1e-12)
        assert rep.params["p"] == pytest.approx(3.0, abs=1e-6)
        assert rep.n < len(hs)

    def test_span_requirements(self):
        with pytest.raises(ValueError, match="decades"):
            order_fit(np.geomspace(0.1, 0.02, 6), np.ones(6) * 0.5)
        with pytest.raises(ValueError, match="at least"):
            order_fit([0.1, 0.01, 0.001], [1, 2, 3])
        # relaxed span via the decades argument
        hs = np.geomspace(0.1, 0.02, 6)
        rep = order_fit(hs, hs ** 2, decades=0.5)
        assert rep.params["p"] == pytest.approx(2.0, abs=1e-8)

    def test_degenerate_after_floor(self):
        hs = np.geomspace(1e-1, 1e-3, 7)
        with pytest.raises(ValueError, match="degenerate"):
            order_fit(hs, np.full(7, 1e-15))


class TestLogFit:
    def test_recovers_log_model(self):
        hs = np.geomspace(1e-1, 1e-4, 11)
        vals = 0.7 + 0.25 * np.log(1.0 / hs)
        rep = log_fit(hs, vals)
        assert rep.params["c0"] == pytest.approx(0.7, abs=1e-8)
        assert rep.params["c1"] == pytest.approx(0.25, abs=1e-8)
        # a genuine log curve is a poor power law
        assert rep.params["power_residual"] > 10 * rep.fit_residual

    def test_degenerate_rejected(self):
        hs = np.geomspace(1e-1, 1e-3, 6)
        with pytest.raises(ValueError, match="degenerate"):
            log_fit(hs, np.ones(6))


class TestFitReport:
    def test_to_json_deterministic_and_sorted(self):
        rep = FitReport(model="power", params={"p": 2.0, "a": 1.5},
                        fit_residual=1e-9, range=(1e-3, 1e-1), n=9)
        s1, s2 = rep.to_json(), rep.to_json()
        assert s1 == s2
        d = json.loads(s1)
        assert list(d) == sorted(d)
        assert d["params"]["p"] == 2.0


class TestResidualScan:
    def test_exact_exponential_has_tiny_residual(self):
        # kappa = 0, W = 1, alpha = 1/2: u = e^{-z/h} solves the equation
        spec = ProblemSpec(kappa=0, sigma=1, alpha=0.5, Z=1.0)

        class Exact:
            def eval2(self, z, h):
                u = math.exp(-z / h)
                return u, -u / h, u / (h * h)

        curve = [(0.5, 0.1), (0.7, 0.1), (0.5, 0.05)]
        rows = residual_scan(Exact(), spec, curve)
        for (z, h, absres, rel) in rows:
            assert rel < 1e-12

    def test_finite_difference_fallback(self):
        spec = ProblemSpec(kappa=0, sigma=1, alpha=0.5, Z=1.0)

        class ExactNoD2:
            def eval(self, z, h):
                u = math.exp(-z / h)
                return u, -u / h

        rows = residual_scan(ExactNoD2(), spec, [(0.5, 0.1)])
        assert rows[0][3] < 1e-6


class TestScenarioLibrary:
    def test_all_scenarios_instantiate(self):
        lib = scenario_library()
        assert set(lib) == {"hydrogen", "rydberg", "sho_log", "model",
                            "jwkb_airy", "anharmonic",
                            "bessel_large_order", "regge_wheeler"}
        for name, sc in lib.items():
            spec = sc.make(**sc.defaults)
            assert isinstance(spec, ProblemSpec)
            assert spec.kappa == sc.kappa
            assert sc.doc

    def test_to_original_maps(self):
        lib = scenario_library()
        # hydrogen: z = sqrt(E) r, h = 1/sqrt(E), so r = z/h
        assert lib["hydrogen"].to_original(0.5, 0.1) == pytest.approx(5.0)
        # rydberg: z = r |E|, h^2 = |E|, so r = z/h^2
        assert lib["rydberg"].to_original(0.5, 0.1) == pytest.approx(50.0)

    def test_parameter_validation(self):
        lib = scenario_library()
        with pytest.raises(ValueError):
            lib["hydrogen"].make(Z_charge=0.0)
        with pytest.raises(ValueError):
            lib["rydberg"].make(Z_charge=1.0, Z=1.5)
        with pytest.raises(ValueError):
            lib["bessel_large_order"].make(Z=1.5)


class TestConeTest:
    def test_energy_range_validated(self):
        with pytest.raises(ValueError):
            cone_test(1.0, [10.0, 100.0, 1000.0])

    def test_free_particle_traces(self):
        # Z_charge = 0: the solution is exactly cos((z-1)/h) and every
        # scaled-error trace sits at the solver noise level; no fits are
        # produced without the Coulomb term
        out = cone_test(0.0, np.geomspace(1e2, 1e3, 3), tol=1e-9)
        assert "fit_B" not in out and "c1_oracle" not in out
        zsA, valsA = out["A"]
        assert np.max(np.abs(valsA)) < 1e-4
        assert np.max(out["B"][1]) < 1e-4

    def test_csv_traces_written(self, tmp_path):
        out = cone_test(0.0, np.geomspace(1e2, 1e3, 3), tol=1e-8,
                        out_dir=str(tmp_path))
        for name in ("A", "B", "C"):
            p = tmp_path / ("conetest.%s.scaled_error.csv" % name)
            assert p.exists()
            assert p.read_text().splitlines()[0].endswith("scaled_error")


class TestShoLogCheck:
    def test_input_validation(self):
        with pytest.raises(ValueError):
            sho_log_check([1.0], [0.001, 0.1])
        with pytest.raises(ValueError):
            sho_log_check([3.0], np.geomspace(0.02, 0.2, 8))


class TestTraceCsv:
    def test_deterministic(self, tmp_path):
        rows = [(0.1, 1.23456789012345e-7), (0.2, 2.5)]
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        trace_to_csv(p1, ("x", "y"), rows)
        trace_to_csv(p2, ("x", "y"), rows)
        assert p1.read_bytes() == p2.read_bytes()
        lines = p1.read_text().splitlines()
        assert lines[0] == "x,y"
        # shortest round-trip formatting preserves the value exactly
        assert float(lines[1].split(",")[1]) == 1.23456789012345e-7
