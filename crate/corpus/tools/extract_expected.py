#!/usr/bin/env python3
"""Write corpus/<frontend>-<backend>/expected.json for every fixture.

The direct dependency expectations are fixed for the whole corpus. The
transitive package set and the dependency edges are enumerated from the
committed lockfile, independently of the Rust implementation. Edges are the
closure walked from the direct dependencies over the lockfile's own
per-package dependency lists.

Requires Python >= 3.8 with `tomli` (or Python >= 3.11 for `tomllib`).
"""
import json
import pathlib
import re
import sys

try:
    import tomllib
except ImportError:  # pragma: no cover
    import tomli as tomllib

CORPUS = pathlib.Path(__file__).resolve().parent.parent

BLACK_SHA = "6fdf8a4af28071ed1d079c01122b34c5d587207a"

DIRECT = [
    {"name": "numpy", "expect": {"kind": "unversioned"}},
    {"name": "docopt", "expect": {"kind": "pinned", "value": "0.6.2"}},
    {"name": "black", "expect": {"kind": "ref", "value": BLACK_SHA}},
    {"name": "seaborn", "expect": {"kind": "pinned", "value": "0.13.2"}},
    {"name": "matplotlib", "expect": {"kind": "constraint", "value": ">=3.5,<4.0"}},
    {"name": "urllib3", "expect": {"kind": "unversioned"}},
]


def canon(name):
    return re.sub(r"[-_.]+", "-", name).lower()


def req_name(req):
    return canon(re.match(r"\s*([A-Za-z0-9][A-Za-z0-9._-]*)", req).group(1))


def poetry_graph(path):
    data = tomllib.loads(path.read_text())
    graph = {}
    for pkg in data.get("package", []):
        graph[canon(pkg["name"])] = sorted(canon(d) for d in pkg.get("dependencies", {}))
    return graph


def pdm_graph(path):
    data = tomllib.loads(path.read_text())
    graph = {}
    for pkg in data.get("package", []):
        graph[canon(pkg["name"])] = sorted(req_name(d) for d in pkg.get("dependencies", []))
    return graph


def pipenv_graph(path):
    data = json.loads(path.read_text())
    graph = {}
    for section in ("default", "develop"):
        for name in data.get(section, {}):
            graph[canon(name)] = []
    return graph


def pipenv_develop(path):
    data = json.loads(path.read_text())
    return sorted(canon(n) for n in data.get("develop", {}))


def closure(graph, roots):
    seen, edges = set(), set()
    frontier = [r for r in roots if r in graph]
    while frontier:
        node = frontier.pop()
        if node in seen:
            continue
        seen.add(node)
        for child in graph[node]:
            if child not in graph:
                continue
            edges.add((node, child))
            frontier.append(child)
    return sorted([a, b] for a, b in edges)


def main():
    direct_names = [canon(d["name"]) for d in DIRECT]
    count = 0
    for fixture in sorted(p for p in CORPUS.iterdir() if p.is_dir() and (p / "README.md").exists()):
        frontend, backend = fixture.name.split("-", 1)
        lockfile, graph, develop = None, None, []
        if (fixture / "poetry.lock").exists():
            lockfile, graph = "poetry.lock", poetry_graph(fixture / "poetry.lock")
        elif (fixture / "pdm.lock").exists():
            lockfile, graph = "pdm.lock", pdm_graph(fixture / "pdm.lock")
        elif (fixture / "Pipfile.lock").exists():
            lockfile, graph = "Pipfile.lock", pipenv_graph(fixture / "Pipfile.lock")
            develop = pipenv_develop(fixture / "Pipfile.lock")
        expected = {
            "frontend": frontend,
            "backend": backend,
            "direct": DIRECT,
            "lockfile": lockfile,
            "transitive_available": lockfile is not None,
            "transitive": sorted(n for n in graph if n not in direct_names) if graph else [],
            "lock_edges": closure(graph, direct_names) if graph else [],
            "develop": develop,
            "remote": ["black", "docopt"],
            "optional": ["black"],
        }
        (fixture / "expected.json").write_text(json.dumps(expected, indent=2) + "\n")
        count += 1
    print(f"wrote {count} expectation files", file=sys.stderr)


if __name__ == "__main__":
    main()
