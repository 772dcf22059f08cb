"""End-to-end checks of the rbsos command line: exit codes, text output and the JSON report schema."""

import hashlib
import json
import os
import subprocess
import sys
import tempfile

import jsonschema

BIN, DATA, SCHEMA = sys.argv[1], sys.argv[2], sys.argv[3]
with open(SCHEMA) as fh:
    schema = json.load(fh)
failures = []


def run(*args, env=None):
    e = dict(os.environ)
    e.update(env or {})
    p = subprocess.run([BIN, *args], capture_output=True, text=True, env=e, timeout=600)
    return p.returncode, p.stdout, p.stderr


def run_json(*args, env=None):
    code, out, err = run(*args, "--json", env=env)
    report = json.loads(out)
    jsonschema.validate(report, schema)
    assert report["exit_code"] == code, (report["exit_code"], code)
    return code, report


def check(name, cond, detail=""):
    print(("ok   " if cond else "FAIL ") + name)
    if not cond:
        failures.append(name)
        if detail:
            print("     " + str(detail)[:2000])


def path(name):
    return os.path.join(DATA, name)


# check-farkas
code, out, _ = run("check-farkas", path("example23.json"))
check("example23 text verdicts", code == 0 and "implication: holds (sampled)" in out and
      "certificate: none" in out and "closedness: unknown" in out, out)
code, rep = run_json("check-farkas", path("example23.json"))
check("example23 report", code == 0 and rep["result"]["certificate"] == "none" and
      rep["result"]["solver_status"] == "infeasible" and rep["certificates"] == [] and
      any(w.startswith("closedness unknown") for w in rep["warnings"]), rep)
with open(path("example23.json"), "rb") as fh:
    check("input digest", rep["input"]["sha256"] == hashlib.sha256(fh.read()).hexdigest())
code, rep = run_json("check-farkas", path("trivial_farkas.json"))
check("trivial certificate", code == 0 and len(rep["certificates"]) == 1 and rep["certificates"][0]["verified"], rep)
code, out, _ = run("check-farkas", path("trivial_farkas.json"))
check("trivial certificate printed", "certificate: found (verified)" in out and "lambda0 = " in out, out)

# parse errors
code, out, err = run("check-farkas", path("malformed.json"))
check("malformed exit 2", code == 2 and "line 5" in err, err)
code, rep = run_json("solve", path("malformed.json"))
check("malformed json report", code == 2 and rep["status"] == "parse-error", rep)
check("missing file exit 2", run("solve", path("does_not_exist.json"))[0] == 2)
check("unknown flag exit 2", run("solve", path("ep2.json"), "--bogus")[0] == 2)
check("odd kmin exit 2", run("solve", path("ep2.json"), "--kmin", "3")[0] == 2)
check("kmax below kmin exit 2", run("solve", path("ep2.json"), "--kmin", "6", "--kmax", "4")[0] == 2)
check("no subcommand exit 2", run()[0] == 2)
check("dimension mismatch exit 2", run("check-feasible", path("ep2.json"), "--x", "0,1", "--y", "0")[0] == 2)
check("wrong file kind exit 2", run("check-farkas", path("ep2.json"))[0] == 2)
check("farkas file to solve exit 2", run("solve", path("example23.json"))[0] == 2)
code, rep = run_json("solve", path("ep2.json"), "--kmin", "5")
check("usage error json report", code == 2 and rep["status"] == "parse-error", rep)

# feasibility and lower level
code, rep = run_json("check-feasible", path("ep2.json"), "--x", "0", "--y", "0")
check("ep2 (0,0) feasible", code == 0 and rep["result"]["feasible"] is True, rep)
code, rep = run_json("check-feasible", path("ep2.json"), "--x", "1", "--y", "0")
check("ep2 (1,0) upper violated", code == 0 and rep["result"]["feasible"] is False and
      rep["result"]["upper_ok"] is False, rep)
code, rep = run_json("check-lower", path("ep2.json"), "--x", "0", "--y", "-1")
check("ep2 y=-1 not lower optimal", code == 0 and rep["result"]["robust_solution"] is False and
      rep["result"]["feasible"] is True, rep)
code, rep = run_json("check-lower", path("ep2.json"), "--x", "0", "--y", "0")
check("ep2 y=0 lower optimal", code == 0 and rep["result"]["robust_solution"] is True, rep)

# solve
code, rep = run_json("solve", path("ep2.json"), "--kmin", "6", "--kmax", "6")
v = rep["values"][0]["val"] if rep["values"] else None
check("ep2 k=6 value 1.000", code == 0 and v is not None and abs(v - 1.0) <= 1e-3, rep["values"])
code, rep = run_json("solve", path("ep3.json"), "--kmin", "4", "--kmax", "4")
v = rep["values"][0]["val"] if rep["values"] else None
check("ep3 k=4 value -2.000", code == 0 and v is not None and abs(v + 2.0) <= 1e-3, rep["values"])
code, rep = run_json("solve", path("ep3.json"), "--kmin", "2", "--kmax", "4")
check("ep3 rejected level reports null", code == 0 and rep["values"][0]["status"] == "rejected" and
      rep["values"][0]["val"] is None, rep["values"])
code, rep = run_json("solve", path("ep3.json"), "--x", "0", "--y", "0", "--kmin", "6")
check("ep3 minimizer certified by solve", code == 0 and rep["result"]["certified"] is True and
      rep["certificates"][0]["kind"] == "sos", rep["result"])
code, out, _ = run("solve", path("ep1.json"))
check("ep1 gated by LSC", code == 4 and "LSC violated" in out, out)
code, rep = run_json("solve", path("ep1.json"))
check("ep1 json hypothesis failure", code == 4 and rep["status"] == "hypothesis-failure" and
      any(w.startswith("LSC violated") for w in rep["warnings"]), rep)
code, rep = run_json("solve", path("ep1.json"), "--force", "--kmin", "2", "--kmax", "4")
check("ep1 forced", code == 0 and len(rep["values"]) == 2 and
      any(w.startswith("LSC violated") for w in rep["warnings"]), rep)
code, rep = run_json("solve", path("ep3.json"), "--x", "0", "--y", "1")
check("infeasible point exit 4", code == 4, rep)
code, rep = run_json("solve", path("ep3.json"), "--kappa", "-5")
check("kappa below f exit 4", code == 4, rep)
code, rep = run_json("solve", path("ep2.json"), "--kmin", "4", env={"RBSOS_MAX_ENUM": "4"})
check("enumeration cap exit 3", code == 3 and rep["status"] == "indeterminate" and
      "RBSOS_MAX_ENUM" in " ".join(rep["warnings"]), rep)
code, rep = run_json("solve", path("ep2.json"), "--kmin", "4", env={"RBSOS_MAX_ENUM": "8"})
check("enumeration cap raised", code == 0, rep)

# certify and artifacts
code, rep = run_json("certify", path("ep1.json"), "--x", "0", "--y", "0", "--k", "6")
check("ep1 certify none", code == 0 and rep["result"]["found"] is False and rep["certificates"] == [] and
      rep["result"]["note"], rep)
code, out, _ = run("certify", path("ep1.json"), "--x", "0", "--y", "0", "--k", "6")
check("ep1 certify text", code == 0 and "certificate: none" in out, out)
with tempfile.TemporaryDirectory() as tmp:
    code, rep = run_json("certify", path("ep3.json"), "--x", "0", "--y", "0", "--k", "6", "--dump-sdp", tmp)
    ok = code == 0 and rep["result"]["found"] is True and len(rep["certificates"]) == 1
    check("ep3 certify at degree 6", ok, rep["result"])
    dump = os.path.join(tmp, "level_k6.txt")
    cert = os.path.join(tmp, "certificate_k6.txt")
    check("conic dump written", os.path.exists(dump))
    check("certificate file written", os.path.exists(cert) and ok and rep["certificates"][0].get("file") == cert)
    if os.path.exists(dump):
        with open(dump) as fh:
            body = [l.split() for l in fh if not l.startswith("#")]
        check("dump has one nonzero per line", len(body) > 0 and all(len(t) == 4 for t in body))
    if os.path.exists(cert):
        with open(cert) as fh:
            names = [l.split("=")[0].strip() for l in fh if "=" in l and not l.startswith("#")]
        check("certificate names", names[:2] == ["t", "sigma0"] and "xi1" in names, names)
code, rep = run_json("certify", path("ep3.json"), "--x", "0", "--y", "1", "--k", "4")
check("certify infeasible candidate exit 4", code == 4, rep)

code, out, _ = run("--help")
check("help exit 0", code == 0 and "check-farkas" in out)

print(f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
