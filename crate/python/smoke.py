#!/usr/bin/env python3
"""Smoke test for the dpifp_py extension module.

Builds the cdylib with cargo if needed, imports it, and runs a miniature
end-to-end pipeline: generate probes, execute them against two simulated
middlebox profiles, fingerprint the results, and check the two profiles
come apart with opposite bits.
"""

import json
import shutil
import subprocess
import sys
import sysconfig
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent

NEGSEQ = "Mutate[l:TCP;f:seq;option:negativeSeqWithPadding]"
TSPROBE = "Mutate[l:TCP;f:option;option:timestamp]"


def ensure_module():
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    dest = Path(__file__).resolve().parent / f"dpifp_py{suffix}"
    built = ROOT / "target" / "debug" / "libdpifp_py.so"
    if not built.exists() or (dest.exists() and dest.stat().st_mtime < built.stat().st_mtime):
        subprocess.run(
            ["cargo", "build", "-p", "dpifp-py"], cwd=ROOT, check=True
        )
    if not dest.exists() or dest.stat().st_mtime < built.stat().st_mtime:
        shutil.copy2(built, dest)
    sys.path.insert(0, str(dest.parent))


def main():
    ensure_module()
    import dpifp_py as fp

    # Probe documents round-trip through YAML.
    base = fp.baseline()
    again = fp.Probe.from_yaml(base.to_yaml())
    assert again.to_yaml() == base.to_yaml()
    again.validate()

    top40 = fp.builtin_top40("http")
    assert len(top40) == 40
    all_http = fp.generate("http")
    assert len(all_http) > 800
    ids = {p.id for p in all_http}
    assert NEGSEQ in ids and TSPROBE in ids

    assert "zeeklike" in fp.zoo_ids() and "snortlike" in fp.zoo_ids()
    assert "zeeklike" in fp.zoo_yaml()

    # Two known profiles separate with opposite bits on the two
    # root-cause probes.
    probes = [base] + [p for p in all_http if p.id in (NEGSEQ, TSPROBE)]
    order = [NEGSEQ, TSPROBE]
    bits = {}
    for profile in ("zeeklike", "snortlike"):
        records = fp.run_sim(probes, profile, "http", 1, 7)
        fpset = json.loads(fp.fingerprints(records, order))
        assert fpset["probe_order"] == order
        (bits[profile],) = fpset["bits"].values()
    assert bits["zeeklike"] == [1, 0], bits
    assert bits["snortlike"] == [0, 1], bits

    raw, conclusive, normalized = fp.masked_hamming(bits["zeeklike"], bits["snortlike"])
    assert (raw, conclusive) == (2, 2) and normalized == 1.0

    # Selection over a small outcome matrix keeps the informative probe.
    matrix = "group,pA,pB\n" "g1,1,1\n" "g2,0,1\n" "g3,1,1\n" "g4,0,1\n"
    assert fp.select_probes(matrix) == ["pA"]

    # Clustering two synthetic groups of fingerprints.
    setdoc = {
        "probe_order": [f"p{i}" for i in range(8)],
        "bits": {},
        "metadata": {},
    }
    for i in range(6):
        setdoc["bits"][f"a{i}"] = [0] * 8
        setdoc["bits"][f"b{i}"] = [1] * 8
    labels = fp.cluster(json.dumps(setdoc), 3)
    truth = [0 if t.startswith("a") else 1 for t in sorted(setdoc["bits"])]
    assert fp.adjusted_rand_index(labels, truth) == 1.0

    print("smoke test passed")


if __name__ == "__main__":
    main()
