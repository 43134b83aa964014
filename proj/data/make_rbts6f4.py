"""Generates rbts6f4.json: RBTS bus 6 feeder 4 split into five microgrids.

Run from this directory: python3 make_rbts6f4.py
"""
import json

H = 8760.0

SECTORS = {
    "industrial1": [[0.30, 0.1], [0.70, 0.12]],
    "industrial2": [[0.15, 0.2], [0.10, 2.0], [0.75, 15.1]],
    "commercial": [[0.20, 2.0], [0.80, 12.87]],
    "residential": [[0.30, 0.1], [0.50, 0.15], [0.20, 0.2]],
}
BUS_SECTOR = {}
for b in (3, 9, 13, 17, 20, 23):
    BUS_SECTOR[b] = "industrial1"
for b in (4, 7, 15, 18, 21):
    BUS_SECTOR[b] = "industrial2"
for b in (2, 8, 12, 16, 22):
    BUS_SECTOR[b] = "commercial"
for b in (1, 5, 6, 10, 11, 14, 19):
    BUS_SECTOR[b] = "residential"
PEAK = {"residential": 0.30, "commercial": 0.35, "industrial1": 0.25, "industrial2": 0.30}

# buses in the main (a) and lateral (b) section of each microgrid
BUSES = {
    1: ([1, 2, 3], [4, 5]),
    2: ([6, 7, 8], [9, 10]),
    3: ([11, 12], [14, 15]),
    4: ([13, 16, 17], [18, 23]),
    5: ([19, 20], [21, 22]),
}
WIND = {1: 0.5, 2: 1.1, 3: 0.5, 4: 1.0, 5: 0.6}
PV = {1: 1.2, 2: 0.5, 3: 0.4, 4: 0.6, 5: 1.0}
ESS_RATE = {1: 0.4, 2: 0.3, 3: 0.2, 4: 0.25, 5: 0.4}
SOC_MIN = {1: 0.2, 2: 0.1, 3: 0.1, 4: 0.1, 5: 0.15}
SOC_MAX = {1: 1.2, 2: 0.8, 3: 0.5, 4: 0.8, 5: 1.0}
DIESEL = {1: [0.4, 0.3], 2: [0.3, 0.5], 3: [0.3], 4: [0.5, 0.5], 5: [0.4, 0.4]}
# (parent, child, section of the parent the tie leaves from)
TREE = [(1, 2, "b"), (2, 3, "b"), (3, 4, "a"), (3, 5, "b")]

# failure rate per year, mean repair hours
RATES = {
    "upstream": (1.0, 6),
    "dms": (0.5, 8),
    "mgcc": (0.5, 8),
    "mc": (0.2, 6),
    "lc": (0.2, 6),
    "cbc": (0.2, 6),
    "cyber-link": (0.3, 4),
    "line": (0.2, 5),
    "transformer": (0.015, 200),
    "switch": (0.006, 4),
    "wind": (1.0, 40),
    "pv": (0.5, 20),
    "diesel": (1.5, 20),
    "ess": (0.5, 24),
}

components = []
cyber_edges = []


def comp(cid, kind, rate_key=None):
    lam, hours = RATES[rate_key or kind]
    components.append({"id": cid, "kind": kind, "failure_rate": lam, "repair_rate": round(H / hours, 6)})
    return cid


def link(a, b, cid):
    comp(cid, "cyber-link")
    cyber_edges.append({"id": cid, "a": a, "b": b})


comp("upstream", "upstream")
comp("dms", "dms")

microgrids, sections, switches, lines = [], [], [], []


def switch(sid, role, ends, controllers, cbc_parent):
    comp(f"brk_{sid}", "switch")
    comp(f"cbc_{sid}", "cbc")
    link(f"cbc_{sid}", cbc_parent, f"lk_cbc_{sid}")
    switches.append({"id": sid, "role": role, "device": f"brk_{sid}", "cbc": f"cbc_{sid}",
                     "controllers": controllers, "between": ends})


for m in range(1, 6):
    mgcc = comp(f"mgcc{m}", "mgcc")
    link("dms", mgcc, f"lk_dms_{m}")
    if m > 1:
        link(f"mgcc{m - 1}", mgcc, f"lk_ring_{m - 1}{m}")
    for part in "ab":
        sid = f"s{m}{part}"
        comp(f"ln{m}{part}", "line")
        sections.append({"id": sid, "microgrid": m, "elements": [f"ln{m}{part}"]})

    def der(name, kind, rate_key, section):
        comp(f"p_{name}", kind, rate_key)
        comp(f"mc_{name}", "mc")
        link(mgcc, f"mc_{name}", f"lk_mc_{name}")
        return {"physical": f"p_{name}", "mc": f"mc_{name}", "section": section}

    mg = {"tag": m, "mgcc": mgcc}
    mg["wind"] = {"capacity": WIND[m], **der(f"w{m}", "physical-der", "wind", f"s{m}a")}
    mg["pv"] = {"capacity": PV[m], **der(f"pv{m}", "physical-der", "pv", f"s{m}a")}
    mg["diesels"] = []
    for k, cap in enumerate(DIESEL[m], start=1):
        unit = der(f"de{m}_{k}", "physical-der", "diesel", f"s{m}{'a' if k == 1 else 'b'}")
        mg["diesels"].append({"id": f"de{m}_{k}", "max_output": cap,
                              "fuel_cost": 0.07 if k == 1 else 0.075, "emission_cost": 0.015, **unit})
    mg["ess"] = {"max_charge": ESS_RATE[m], "max_discharge": ESS_RATE[m], "charge_eff": 0.98,
                 "discharge_eff": 0.98, "soc_min": SOC_MIN[m], "soc_max": SOC_MAX[m],
                 "charge_cost": 0.002, "discharge_cost": 0.002,
                 **der(f"ess{m}", "physical-ess", "ess", f"s{m}b")}
    mg["load_points"] = []
    for part, buses in zip("ab", BUSES[m]):
        for b in buses:
            comp(f"tr{b}", "transformer")
            comp(f"lc{b}", "lc")
            link(mgcc, f"lc{b}", f"lk_lc{b}")
            sector = BUS_SECTOR[b]
            mg["load_points"].append({"id": f"lp{b}", "bus": b, "peak_load": PEAK[sector], "sector": sector,
                                      "transformer": f"tr{b}", "lc": f"lc{b}", "section": f"s{m}{part}"})
    microgrids.append(mg)
    switch(f"in{m}", "internal", [f"s{m}a", f"s{m}b"], [mgcc], mgcc)

switch("sub", "substation", ["substation", "s1a"], ["dms"], "dms")
for parent, child, side in TREE:
    sid = f"poi{parent}{child}"
    switch(sid, "poi", [f"s{parent}{side}", f"s{child}a"], ["dms", f"mgcc{child}"], f"mgcc{child}")
    lines.append({"from": parent, "to": child, "capacity": 8.0, "poi_switch": sid})
switch("bk23", "backup", ["s4b", "backup"], ["dms", "mgcc4"], "mgcc4")

case = {
    "name": "rbts6f4",
    "sectors": SECTORS,
    "components": components,
    "sections": sections,
    "microgrids": microgrids,
    "switches": switches,
    "lines": lines,
    "substation": {"capacity": 10.0, "upstream": "upstream", "dms": "dms", "switch": "sub"},
    "backup": {"enabled": False, "switch": "bk23", "capacity": 2.0},
    "cyber_edges": cyber_edges,
    "defaults": {"delta_t": 1.0, "soc_start_fraction": 0.5, "lambda_ser": 0.01, "lambda_thr": 2.0},
    "series": {"source": "synthetic", "years": 1, "seed": 2021},
}

with open("rbts6f4.json", "w") as f:
    json.dump(case, f, indent=1)
    f.write("\n")
print(len(components), "components")
