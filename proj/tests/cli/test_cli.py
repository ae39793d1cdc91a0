"""End-to-end checks of the lcausal command-line tool.

Expects LCAUSAL_BIN, LCAUSAL_SCHEMA and LCAUSAL_CONFIGS in the environment.
"""
import json
import os
import shutil
import subprocess
import tempfile
import unittest

import jsonschema

BIN = os.environ["LCAUSAL_BIN"]
SCHEMA = json.load(open(os.environ["LCAUSAL_SCHEMA"]))
CONFIGS = os.environ["LCAUSAL_CONFIGS"]

LINEAR_SCHEMA = {"c": "continuous", "a1": "continuous", "l": "continuous", "a2": "continuous", "y": "continuous"}


def run(*args, env=None):
    full_env = dict(os.environ)
    full_env.update(env or {})
    return subprocess.run([BIN, *map(str, args)], capture_output=True, text=True, env=full_env)


def validate(doc):
    jsonschema.Draft202012Validator(SCHEMA).validate(doc)


class Workspace(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.dir = tempfile.mkdtemp(prefix="lcausal_cli_")
        cls.csv = os.path.join(cls.dir, "lc.csv")
        r = run("simulate", "--kind", "linear_chain", "--n", 20000, "--seed", 21, "--out", cls.csv)
        assert r.returncode == 0, r.stderr

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.dir)

    def config(self, name, body):
        path = os.path.join(self.dir, name)
        with open(path, "w") as f:
            json.dump(body, f)
        return path

    def tce_config(self, name="tce.json", **extra):
        body = {
            "data": {"path": "lc.csv", "schema": LINEAR_SCHEMA},
            "analysis": {"estimand": {"kind": "TCE", "exposure": "a1", "outcome": "y", "confounders": ["c"]}},
        }
        body.update(extra)
        return self.config(name, body)


class EstimateTest(Workspace):
    def test_tce_recovers_truth(self):
        out = os.path.join(self.dir, "tce_result.json")
        r = run("estimate", self.tce_config(), "--seed", 5, "--boot", 200, "--out", out)
        self.assertEqual(r.returncode, 0, r.stderr)
        doc = json.load(open(out))
        validate(doc)
        tce = doc["estimates"]["TCE"]
        self.assertLess(abs(tce["point"] - 0.2825), 3 * tce["se"])
        self.assertEqual(doc["meta"]["seed"], 5)
        self.assertEqual(len(doc["meta"]["config_digest"]), 64)
        self.assertEqual(doc["inference"]["replicates"], 200)

    def test_truth_matches_simulate(self):
        r = run("simulate", "--kind", "linear_chain", "--n", 10, "--out", os.path.join(self.dir, "t.csv"), "--truth", "-")
        self.assertEqual(r.returncode, 0, r.stderr)
        self.assertAlmostEqual(json.loads(r.stdout)["truth"]["TCE:a1"]["value"], 0.2825, places=12)

    def test_missing_column_is_config_error(self):
        path = self.config("missing.json", {
            "data": {"path": "lc.csv", "schema": dict(LINEAR_SCHEMA, w="continuous")},
            "analysis": {"estimand": {"kind": "TCE", "exposure": "a1", "outcome": "y", "confounders": ["c"]}},
        })
        self.assertEqual(run("estimate", path, "--seed", 1).returncode, 2)
        path = self.config("missing_model.json", {
            "data": {"path": "lc.csv", "schema": LINEAR_SCHEMA},
            "analysis": {"estimand": {"kind": "TCE", "exposure": "a1", "outcome": "y", "confounders": ["w"]}},
        })
        self.assertEqual(run("estimate", path, "--seed", 1).returncode, 2)

    def test_seed_is_mandatory(self):
        r = run("estimate", self.tce_config())
        self.assertEqual(r.returncode, 2)
        self.assertIn("seed", r.stderr)

    def test_bad_json_and_wrong_block(self):
        bad = os.path.join(self.dir, "bad.json")
        with open(bad, "w") as f:
            f.write("{ not json")
        self.assertEqual(run("estimate", bad, "--seed", 1).returncode, 2)
        self.assertEqual(run("twin", self.tce_config()).returncode, 2)

    def test_deterministic_across_threads(self):
        path = self.config("cde.json", {
            "data": {"path": "lc.csv", "schema": LINEAR_SCHEMA},
            "analysis": {"estimand": {
                "kind": "CDE", "exposure": "a1", "confounders": ["c"], "intermediate_confounders": ["l"],
                "fixed": [{"a2": 0}, {"a2": 1}], "outcome_model": "y ~ a1 + a2 + l + c",
                "intermediate_models": ["l ~ a1 + c"], "mc_draws": 20}},
        })
        outputs = []
        for threads in (1, 3, 1):
            out = os.path.join(self.dir, f"det_{threads}_{len(outputs)}.json")
            r = run("estimate", path, "--seed", 9, "--boot", 10, "--out", out, env={"LCAUSAL_THREADS": str(threads)})
            self.assertEqual(r.returncode, 0, r.stderr)
            outputs.append(open(out, "rb").read())
        self.assertEqual(outputs[0], outputs[1])
        self.assertEqual(outputs[0], outputs[2])
        r = run("--threads", 2, "estimate", path, "--seed", 9, "--boot", 10, "--out", "-")
        self.assertEqual(r.stdout.encode(), outputs[0])


class ExitCodeTest(Workspace):
    def test_estimation_error(self):
        twins = os.path.join(self.dir, "tw.csv")
        self.assertEqual(run("simulate", "--kind", "twin_pairs:shared", "--n", 50, "--out", twins).returncode, 0)
        path = self.config("concordant.json", {
            "data": {"path": "tw.csv", "schema": {"pair_id": "cluster", "mz": "binary", "y1": "continuous",
                                                  "x": "continuous", "y2": "continuous"}},
            "analysis": {"twin": {"exposure": "mz", "outcome": "y2"}},
        })
        r = run("twin", path, "--mode", "bw")
        self.assertEqual(r.returncode, 3, r.stderr)

    def test_bootstrap_abort(self):
        # One exposed row in forty: most resamples lose the A=1 stratum.
        data = os.path.join(self.dir, "rare.csv")
        with open(data, "w") as f:
            f.write("c,a,m,y\n")
            for i in range(40):
                f.write(f"{(i % 7) / 7},{1 if i == 0 else 0},{i % 2},{(i % 5) / 5}\n")
        path = self.config("rare.json", {
            "data": {"path": "rare.csv", "schema": {"c": "continuous", "a": "binary", "m": "binary", "y": "continuous"}},
            "analysis": {"estimand": {"kind": "CDM", "exposure": "a", "confounders": ["c"], "fixed": [{"m": 0}],
                                      "outcome_model": "y ~ a + m + c"}},
        })
        r = run("estimate", path, "--seed", 1, "--boot", 50)
        self.assertEqual(r.returncode, 4, r.stderr)

    def test_unknown_subcommand(self):
        self.assertEqual(run("frobnicate").returncode, 2)


class OtherCommandsTest(Workspace):
    def test_reliability_disattenuates(self):
        csv = os.path.join(self.dir, "ee.csv")
        self.assertEqual(run("simulate", "--kind", "exposure_error", "--n", 20000, "--seed", 4, "--out", csv).returncode, 0)
        path = self.config("ee.json", {
            "data": {"path": "ee.csv", "schema": {"x": "continuous", "y": "continuous"}},
            "analysis": {"estimand": {"kind": "TCE", "exposure": "x", "outcome": "y"}},
        })
        naive = json.loads(run("estimate", path, "--seed", 1, "--out", "-").stdout)["estimates"]["TCE"]["point"]
        r = run("estimate", path, "--seed", 1, "--out", "-", "--reliability", "0.7")
        self.assertEqual(r.returncode, 0, r.stderr)
        doc = json.loads(r.stdout)
        validate(doc)
        self.assertAlmostEqual(doc["estimates"]["TCE"]["point"], naive / 0.7, places=12)
        self.assertEqual(run("estimate", path, "--seed", 1, "--reliability", "1.5").returncode, 2)

    def test_growth_flags(self):
        csv = os.path.join(self.dir, "g.csv")
        self.assertEqual(run("simulate", "--kind", "alspac_growth", "--n", 500, "--out", csv).returncode, 0)
        cols = ["c_edu", "c_occ", "c_smoke", "c_mbmi", "c_psych", "bw"] + [f"bmi{a}" for a in range(7, 13)] + ["be"]
        schema = {c: ("binary" if c == "c_smoke" else "continuous") for c in cols}
        path = self.config("g.json", {
            "data": {"path": "g.csv", "schema": schema},
            "analysis": {"estimand": {"kind": "INTERVENTIONAL_MULTI", "exposure": "bw", "outcome": "be",
                                      "confounders": ["c_edu", "c_mbmi"], "mediator_blocks": [["size"], ["velocity"]],
                                      "mc_draws": 5}},
        })
        r = run("estimate", path, "--seed", 2, "--out", "-", "--growth-from", ",".join(f"bmi{a}" for a in range(7, 13)),
                "--ages", "7,8,9,10,11,12", "--center", "9.5")
        self.assertEqual(r.returncode, 0, r.stderr)
        doc = json.loads(r.stdout)
        validate(doc)
        self.assertIn("IIE_2", doc["estimates"])
        self.assertEqual(run("estimate", path, "--seed", 2, "--growth-from", "bmi7,bmi8").returncode, 2)

    def test_dag_text(self):
        g = os.path.join(self.dir, "g.txt")
        with open(g, "w") as f:
            f.write("C -> A\nC -> Y\nA -> M -> Y\n")
        r = run("dag", g, "--exposure", "A", "--outcome", "Y", "--dsep", "A,Y", "--given", "C,M")
        self.assertEqual(r.returncode, 0, r.stderr)
        doc = json.loads(r.stdout)
        validate(doc)
        self.assertEqual(doc["dag"]["backdoor"]["minimal_sets"], [["C"]])
        self.assertTrue(doc["dag"]["d_separation"]["separated"])


class SampleConfigTest(unittest.TestCase):
    """Every shipped config runs and its result validates against the schema."""

    COMMANDS = {"estimand": "estimate", "lifecourse": "lifecourse", "twin": "twin", "iv": "iv", "dag": "dag"}

    @classmethod
    def setUpClass(cls):
        cls.dir = tempfile.mkdtemp(prefix="lcausal_configs_")
        shutil.copytree(CONFIGS, os.path.join(cls.dir, "configs"))
        cls.configs = os.path.join(cls.dir, "configs")
        r = subprocess.run(["sh", os.path.join(cls.configs, "simulate_all.sh")], capture_output=True, text=True,
                           env=dict(os.environ, LCAUSAL=BIN))
        assert r.returncode == 0, r.stderr

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.dir)

    def test_configs(self):
        names = sorted(n for n in os.listdir(self.configs) if n.endswith(".json"))
        self.assertGreaterEqual(len(names), 10)
        for name in names:
            with self.subTest(config=name):
                path = os.path.join(self.configs, name)
                block = next(iter(json.load(open(path))["analysis"]))
                cmd = self.COMMANDS[block]
                args = [cmd, path, "--out", "-"]
                if cmd == "estimate":
                    args += ["--seed", 1, "--boot", 10]
                elif cmd in ("lifecourse", "twin"):
                    args += ["--boot", 10]
                r = run(*args)
                self.assertEqual(r.returncode, 0, r.stderr)
                validate(json.loads(r.stdout))


if __name__ == "__main__":
    unittest.main()
