#!/usr/bin/env python3
"""
Integration test script for freejacobi.
Runs the command-line tool end to end: fubm -> stationary -> moments -> jacobi -> verify
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path
from typing import Dict, List, Optional


class FreeJacobiIntegrationTest:
    """Test the complete flow of the freejacobi command-line tool."""

    def __init__(self, grid: int = 4096):
        self.grid = grid
        self.workdir = Path(tempfile.mkdtemp(prefix="freejacobi-"))
        self.results: Dict[str, bool] = {}

    def run(self, *args: str, timeout: int = 900) -> subprocess.CompletedProcess:
        command = [sys.executable, "-m", "freejacobi", "--log-level", "WARNING", *args]
        return subprocess.run(command, capture_output=True, text=True, timeout=timeout)

    def read_json(self, name: str) -> Optional[dict]:
        path = self.workdir / name
        if not path.exists():
            return None
        with open(path) as handle:
            return json.load(handle)

    def record(self, name: str, ok: bool, detail: str = "") -> bool:
        self.results[name] = ok
        print(f"  {'✅' if ok else '❌'} {name}{': ' + detail if detail else ''}")
        return ok

    def check_cli(self) -> bool:
        """Check the module entry point answers --help."""
        print("\n🔍 Checking command-line entry point...")
        result = self.run("--help", timeout=60)
        return self.record("entry point", result.returncode == 0 and "liberation" in result.stdout)

    def test_fubm(self):
        """Test the free unitary Brownian motion density and its sidecar."""
        print("\n🌀 Testing fubm...")
        result = self.run("fubm", "--t", "1", "--grid", str(self.grid), "--out", str(self.workdir / "d.csv"))
        metadata = self.read_json("d.json") or {}
        rows = (self.workdir / "d.csv").read_text().splitlines() if (self.workdir / "d.csv").exists() else []
        self.record("fubm exit code", result.returncode == 0, result.stderr.strip()[-200:])
        self.record("fubm rows", len(rows) == self.grid + 1, f"{len(rows) - 1} rows")
        self.record("fubm support edge", abs(metadata.get("g", 0.0) - 1.9132230) < 1e-6,
                    f"g(1) = {metadata.get('g')}")
        result = self.run("fubm", "--t", "8", "--grid", str(self.grid), "--out", str(self.workdir))
        support = (self.read_json("fubm_t8.json") or {}).get("support")
        self.record("fubm full circle", result.returncode == 0 and support == "full-circle", str(support))

    def test_stationary(self):
        """Test the stationary law for alpha = 0.6, beta = 0.2."""
        print("\n⚖️  Testing stationary...")
        result = self.run("stationary", "--alpha", "0.6", "--beta", "0.2", "--out", str(self.workdir))
        metadata = self.read_json("nu_inf.json") or {}
        masses = sorted(atom["mass"] for atom in metadata.get("atoms", []))
        self.record("stationary exit code", result.returncode == 0, result.stderr.strip()[-200:])
        self.record("stationary atoms", len(masses) == 2 and abs(masses[0] - 0.2) < 1e-12
                    and abs(masses[1] - 0.4) < 1e-12, str(masses))
        self.record("stationary r+", abs(metadata.get("r_plus", 0.0) - 0.66384) < 1e-5,
                    f"r+ = {metadata.get('r_plus')}")

    def test_moments(self):
        """Test the moment hierarchy tables."""
        print("\n📈 Testing moments...")
        result = self.run("moments", "--t", "0.5", "1", "2", "--alpha", "0.6", "--beta", "0.2", "--order", "8",
                          "--out", str(self.workdir / "moments"))
        files: List[str] = list(((self.read_json("moments/moments.json") or {}).get("files") or {}).values())
        self.record("moments exit code", result.returncode == 0, result.stderr.strip()[-200:])
        self.record("moments tables", len(files) == 3, ", ".join(files))

    def test_jacobi(self):
        """Test the free Jacobi law for trP = 0.8, trQ = 0.6."""
        print("\n🧮 Testing jacobi...")
        result = self.run("jacobi", "--t", "1", "--trP", "0.8", "--trQ", "0.6", "--grid", str(self.grid),
                          "--out", str(self.workdir))
        metadata = self.read_json("mu_t1.json") or {}
        atoms = metadata.get("atoms", {})
        self.record("jacobi exit code", result.returncode == 0, result.stderr.strip()[-200:])
        self.record("jacobi atoms", abs(atoms.get("0", 0.0) - 0.4) < 1e-9 and abs(atoms.get("1", 0.0) - 0.4) < 1e-9,
                    str(atoms))
        self.record("jacobi mass", abs(metadata.get("mass", 0.0) - 1.0) < 1e-6, f"mass = {metadata.get('mass')}")

    def test_parameter_errors(self):
        """Test the exit code of invalid parameters."""
        print("\n🚫 Testing parameter errors...")
        self.record("missing --t", self.run("fubm", timeout=60).returncode == 2)
        self.record("alpha out of range", self.run("stationary", "--alpha", "1.5", "--out", str(self.workdir),
                                                   timeout=60).returncode == 2)

    def test_verify(self):
        """Test the fast acceptance suites."""
        print("\n🧪 Testing verify...")
        for suite in ("fubm", "jacobi"):
            result = self.run("verify", "--suite", suite, "--out", str(self.workdir))
            report = self.read_json(f"verify_{suite}.json") or {}
            checks = report.get("checks", [])
            self.record(f"verify {suite}", result.returncode == 0,
                        f"{sum(c['passed'] for c in checks)}/{len(checks)} checks passed")

    def run_full_test(self) -> int:
        """Run the complete integration test."""
        print("=" * 70)
        print("🚀 freejacobi Integration Test")
        print(f"   Output directory: {self.workdir}")
        print("=" * 70)

        if not self.check_cli():
            print("\n⚠️  Warning: the freejacobi module could not be started!")
            print("   Install the requirements and run from the repository root.")
            return 1

        self.test_fubm()
        self.test_stationary()
        self.test_moments()
        self.test_jacobi()
        self.test_parameter_errors()
        self.test_verify()

        failed = [name for name, ok in self.results.items() if not ok]
        print("\n" + "=" * 70)
        if failed:
            print(f"❌ Integration test finished with {len(failed)} failures: {', '.join(failed)}")
        else:
            print("✅ Integration test completed!")
        print("=" * 70)
        return 1 if failed else 0


if __name__ == "__main__":
    tester = FreeJacobiIntegrationTest()
    sys.exit(tester.run_full_test())
