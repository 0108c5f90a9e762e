from fogsim.scenario import FogNodeConfig, Scenario, VehicleConfig


def make_scenario(nodes, vehicles=(), **kw):
    """nodes: (id, x, y, radius); vehicles: (id, x, y[, attached])."""
    fogs = tuple(FogNodeConfig(n[0], n[1], n[2], n[3]) for n in nodes)
    vs = tuple(VehicleConfig(v[0], v[1], v[2], v[3] if len(v) > 3 else None) for v in vehicles)
    kw.setdefault("name", "test")
    return Scenario(fog_nodes=fogs, vehicles=vs, **kw)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[str, str] = {}


def record(criterion: str, ok: bool, detail: str):
    line = f"{criterion}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
