"""Smoke test for the `apichain` extension module.

Builds the cdylib with cargo, loads it from a temporary directory and runs
the bundled replay example through it.
"""

import importlib.util
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent
DATA = ROOT / "crates" / "cli" / "tests" / "data"


def load_module():
    subprocess.run(["cargo", "build", "-p", "apichain-py"], cwd=ROOT, check=True)
    built = ROOT / "target" / "debug" / "libapichain_py.so"
    target = pathlib.Path(tempfile.mkdtemp()) / "apichain.so"
    shutil.copy(built, target)
    spec = importlib.util.spec_from_file_location("apichain", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    ac = load_module()

    assert ac.normalize_fqn("java.util.List.add( int )") == "java.util.List.add"
    assert ac.extract_fqns("Use java.util.ArrayList, not java.util.Vector.") == [
        "java.util.ArrayList",
        "java.util.Vector",
    ]
    assert ac.generate_pairs(["c.D", "a.B", "c.D"]) == [("a.B", "c.D")]
    assert len(ac.relation_types()) == 7
    try:
        ac.normalize_fqn("not a name")
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

    m = ac.score_relations(
        [("t", "a.B", "c.D", "function-similarity"), ("t", "a.B", "e.F", "function-similarity")],
        [("t", "c.D", "a.B", "function-similarity")],
    )
    assert (m.tp, m.fp, m.fn) == (1, 1, 0), m
    assert abs(m.f1 - 2 / 3) < 1e-12

    pipe = ac.Pipeline(backend="replay", fixtures=str(DATA / "strings" / "fixtures"))
    text = (DATA / "strings" / "strings.txt").read_text().strip()
    parsed = pipe.parse("strings", text)
    assert len(parsed["pairs"]) == 3, parsed
    report = pipe.infer("strings", text)
    holding = [t for t in report["triples"] if t["holds"]]
    assert "error" not in report, report["error"]
    assert len(holding) == 7, holding
    print(f"ok: {len(holding)} relations, backend={pipe.backend_id}, stats={pipe.stats()}")


if __name__ == "__main__":
    sys.exit(main())
