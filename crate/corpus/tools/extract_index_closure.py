#!/usr/bin/env python3
"""Write corpus/index-closure.json: the dependency graph of the lockfile-less
fixtures, expanded over the recorded index cache.

Policy: index state as of 2024-03-01T00:00:00Z, CPython 3.11 on Linux,
yanked releases skipped, pre-releases excluded, newest eligible release
wins and the first version chosen for a name is kept. Remote (URL or VCS)
dependencies are not expanded. Uses `packaging` for specifiers and markers,
independently of the Rust implementation.
"""
import json
import pathlib
import re
from datetime import datetime, timezone

from packaging.requirements import Requirement
from packaging.specifiers import SpecifierSet
from packaging.version import InvalidVersion, Version

CORPUS = pathlib.Path(__file__).resolve().parent.parent
CACHE = CORPUS / "index-cache" / "pypi.org"
AS_OF = datetime(2024, 3, 1, tzinfo=timezone.utc)
PYTHON = Version("3.11.0")
ENV = {
    "python_version": "3.11",
    "python_full_version": "3.11.0",
    "os_name": "posix",
    "sys_platform": "linux",
    "platform_system": "Linux",
    "platform_machine": "x86_64",
    "platform_python_implementation": "CPython",
    "implementation_name": "cpython",
    "implementation_version": "3.11.0",
    "platform_release": "",
    "platform_version": "",
}


def canon(name):
    return re.sub(r"[-_.]+", "-", name).lower()


def load(path):
    return json.loads(path.read_text())["body"]


def pick(name, spec):
    body = load(CACHE / f"{name}.json")
    best = None
    for raw, files in body["releases"].items():
        try:
            v = Version(raw)
        except InvalidVersion:
            continue
        if v.is_prerelease or not files:
            continue
        if all(f.get("yanked") for f in files):
            continue
        uploads = [f["upload_time_iso_8601"] for f in files if f.get("upload_time_iso_8601")]
        if not uploads:
            continue
        first = min(datetime.fromisoformat(u.replace("Z", "+00:00")) for u in uploads)
        if first > AS_OF:
            continue
        rp = next((f.get("requires_python") for f in files if f.get("requires_python")), None)
        if rp and PYTHON not in SpecifierSet(rp):
            continue
        if v not in spec:
            continue
        if best is None or v > best:
            best = v
    return best


def requires(name, version):
    body = load(CACHE / name / f"{version}.json")
    return body["info"].get("requires_dist") or []


def active(req, extras):
    if req.marker is None:
        return True
    return any(req.marker.evaluate(dict(ENV, extra=e)) for e in (extras or {""}))


def closure(roots):
    chosen, extras_done, edges = {}, {}, set()
    queue = [(name, spec, set()) for name, spec in roots]
    while queue:
        nxt = []
        for name, spec, extras in sorted(queue, key=lambda q: q[0]):
            if name not in chosen:
                chosen[name] = pick(name, spec)
            version = chosen[name]
            done = extras_done.setdefault(name, None)
            todo = extras | {""}
            if done is not None and todo <= done:
                continue
            extras_done[name] = (done or set()) | todo
            for text in requires(name, version):
                req = Requirement(text)
                child = canon(req.name)
                if child == name or not active(req, todo):
                    continue
                edges.add((name, child))
                nxt.append((child, req.specifier, set(req.extras)))
        queue = nxt
    return chosen, edges


def main():
    out = {}
    for fixture in sorted(p for p in CORPUS.iterdir() if (p / "expected.json").exists()):
        expected = json.loads((fixture / "expected.json").read_text())
        if expected["lockfile"]:
            continue
        roots = []
        for d in expected["direct"]:
            name = canon(d["name"])
            if name in expected["remote"]:
                continue
            kind, value = d["expect"]["kind"], d["expect"].get("value")
            spec = SpecifierSet(f"=={value}" if kind == "pinned" else value if kind == "constraint" else "")
            roots.append((name, spec))
        chosen, edges = closure(roots)
        out[fixture.name] = {
            "versions": {k: str(v) for k, v in sorted(chosen.items())},
            "edges": sorted([a, b] for a, b in edges),
        }
    (CORPUS / "index-closure.json").write_text(json.dumps(out, indent=2) + "\n")


if __name__ == "__main__":
    main()
