import io
import json

import pytest

from twobox import DomainError, load_config, run_cli
from twobox import cli as cli_module
from twobox.transfer import Ledger

BASE = ["--mass", "1", "--stiffness", "100", "--gravity", "10"]


def call(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run_cli(argv, stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_analytic():
    code, out, _ = call(["analytic", *BASE])
    assert code == 0
    assert "initial_total: 0.5 J" in out
    assert "final_total: 0.25 J" in out
    assert "delta_total: -0.25 J" in out


def test_transfer_odd_drops(tmp_path):
    code, _, err = call(["transfer", *BASE, "--drops", "11", "--out", str(tmp_path)])
    assert code == 1
    assert "even" in err


def test_transfer_writes_files(tmp_path):
    code, out, _ = call(["transfer", *BASE, "--drops", "10", "--out", str(tmp_path), "--check"])
    assert code == 0
    assert "audit: pass" in out
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["delta_total_exact"] == pytest.approx(-0.25, rel=1e-12)
    assert summary["drop_count"] == 10
    audit = json.loads((tmp_path / "audit.json").read_text())
    assert audit["passed"] is True
    with open(tmp_path / "ledger.csv", newline="") as fh:
        assert len(Ledger.read_csv(fh)) == 10


@pytest.mark.parametrize("fmt, files", [("csv", {"ledger.csv"}), ("json", {"summary.json", "audit.json"})])
def test_transfer_format(tmp_path, fmt, files):
    code, _, _ = call(["transfer", *BASE, "--drops", "4", "--out", str(tmp_path), "--format", fmt])
    assert code == 0
    assert {p.name for p in tmp_path.iterdir()} == files


def test_transfer_photon(tmp_path):
    m = 1.0 / 299_792_458.0**2
    code, _, _ = call(["transfer", "--mass", repr(10 * m), "--stiffness", "1", "--gravity", "10",
                       "--photon-energy", "1", "--out", str(tmp_path)])
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["mass_source"] == "photon"
    assert summary["drop_count"] == 10


def test_check_fails_on_bad_audit(tmp_path, monkeypatch):
    real = cli_module.simulate_transfer

    def tampered(params, plan):
        import dataclasses

        s = real(params, plan)
        return dataclasses.replace(s, records=s.records.replace(0, gravity_work=1.0))

    monkeypatch.setattr(cli_module, "simulate_transfer", tampered)
    argv = ["transfer", *BASE, "--drops", "10", "--out", str(tmp_path)]
    assert call(argv)[0] == 0
    code, out, _ = call([*argv, "--check"])
    assert code == 1
    assert "failed ledger_identity" in out


def test_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert call(["transfer", *BASE, "--drops", "1000", "--out", str(d)])[0] == 0
    for name in ("ledger.csv", "summary.json", "audit.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_numbers_roundtrip(tmp_path):
    call(["transfer", "--mass", "0.7", "--stiffness", "3.3", "--gravity", "9.81", "--drops", "30",
          "--out", str(tmp_path)])
    raw = (tmp_path / "ledger.csv").read_text()
    for line in raw.splitlines()[1:]:
        for tok in line.split(",")[2:]:
            assert float(format(float(tok), ".17g")) == float(tok)
    assert b"\r" not in (tmp_path / "ledger.csv").read_bytes()


def test_sweep(tmp_path):
    code, out, _ = call(["sweep", *BASE, "--drops", "10,100,1000", "--out", str(tmp_path)])
    assert code == 0
    rows = (tmp_path / "sweep.csv").read_text().splitlines()[1:]
    errs = [float(r.split(",")[2]) for r in rows]
    assert errs == pytest.approx([0.05, 0.005, 0.0005], rel=1e-9)
    assert "slope" in out
    assert json.loads((tmp_path / "sweep.json").read_text())["slope_delta2"] == pytest.approx(-1.0, abs=0.01)


def test_sweep_jobs(tmp_path):
    code, _, _ = call(["sweep", *BASE, "--drops", "10,100", "--jobs", "2", "--out", str(tmp_path)])
    assert code == 0


def test_sweep_bad_list(tmp_path):
    assert call(["sweep", *BASE, "--drops", "10,7", "--out", str(tmp_path)])[0] == 1
    assert call(["sweep", *BASE, "--drops", "ten", "--out", str(tmp_path)])[0] == 2


def test_capacitor(tmp_path):
    code, out, _ = call(["capacitor", "--capacitance", "1", "--charge", "1", "--resistance", "7",
                         "--out", str(tmp_path)])
    assert code == 0
    doc = json.loads((tmp_path / "capacitor.json").read_text())
    assert doc["domain"] == "electrical"
    assert doc["dissipated_numeric"] == pytest.approx(0.25, rel=1e-6)
    assert (tmp_path / "transient.csv").read_text().startswith("t,q1,q2,cumulative_dissipated\n")


def test_capacitor_ideal(tmp_path):
    code, out, _ = call(["capacitor", "--capacitance", "2", "--charge", "4", "--out", str(tmp_path)])
    assert code == 0
    assert "initial_total: 4.0 J" in out
    assert not (tmp_path / "transient.csv").exists()


def test_map_both_ways(tmp_path):
    code, out, _ = call(["map", *BASE, "--out", str(tmp_path)])
    assert code == 0
    assert json.loads((tmp_path / "map.json").read_text()) == {
        "direction": "electrical", "capacitance": 100.0, "charge": 10.0, "resistance": 0.0
    }
    code, out, _ = call(["map", "--capacitance", "100", "--charge", "10", "--gravity", "10", "--out", str(tmp_path)])
    assert code == 0
    assert json.loads((tmp_path / "map.json").read_text())["mass"] == 1.0


def test_usage_errors():
    code, _, _ = call([])
    assert code == 2
    assert call(["transfer", "--mass", "abc"])[0] == 2
    assert call(["--help"])[0] == 0


def test_domain_error_names_field():
    code, _, err = call(["analytic", "--mass", "1", "--gravity", "10"])
    assert code == 1
    assert "stiffness" in err


class TestConfig:
    def write(self, tmp_path, doc, name="cfg.json"):
        p = tmp_path / name
        p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
        return p

    def test_minimal(self, tmp_path):
        cfg = load_config(self.write(tmp_path, {"mass": 1, "stiffness": 100, "gravity": 10, "drops": 10}))
        assert cfg.plan.drop_count == 10
        assert cfg.params.stiffness == 100.0

    def test_missing_stiffness(self, tmp_path):
        with pytest.raises(DomainError, match="stiffness"):
            load_config(self.write(tmp_path, {"mass": 1, "gravity": 10, "drops": 10}))

    def test_odd_drops(self, tmp_path):
        with pytest.raises(DomainError, match="even"):
            load_config(self.write(tmp_path, {"mass": 1, "stiffness": 100, "gravity": 10, "drops": 7}))

    def test_unknown_field(self, tmp_path):
        with pytest.raises(DomainError, match="colour"):
            load_config(self.write(tmp_path, {"mass": 1, "stiffness": 100, "gravity": 10, "colour": 1}))

    def test_cli_parse_error(self, tmp_path):
        p = self.write(tmp_path, "{not json")
        assert call(["analytic", "--config", str(p)])[0] == 2

    def test_cli_nested_rejected(self, tmp_path):
        p = self.write(tmp_path, {"params": {"mass": 1}})
        assert call(["analytic", "--config", str(p)])[0] == 2

    def test_cli_validation_error(self, tmp_path):
        p = self.write(tmp_path, {"mass": 1, "gravity": 10})
        code, _, err = call(["analytic", "--config", str(p)])
        assert code == 1 and "stiffness" in err

    def test_flags_override_file(self, tmp_path):
        p = self.write(tmp_path, {"mass": 1, "stiffness": 100, "gravity": 10, "drops": 7, "out": str(tmp_path / "x")})
        code, _, _ = call(["transfer", "--config", str(p), "--drops", "10"])
        assert code == 0
        summary = json.loads((tmp_path / "x" / "summary.json").read_text())
        assert summary["drop_count"] == 10
        p = self.write(tmp_path, {"mass": 1, "stiffness": 100, "gravity": 10})
        code, out, _ = call(["analytic", "--config", str(p), "--mass", "2"])
        assert code == 0
        assert "initial_total: 2.0 J" in out

    def test_config_sweep(self, tmp_path):
        p = self.write(tmp_path, {"mass": 1, "stiffness": 100, "gravity": 10, "sweep": [10, 100],
                                  "out": str(tmp_path), "format": "csv"})
        assert call(["sweep", "--config", str(p)])[0] == 0
        assert (tmp_path / "sweep.csv").exists()
