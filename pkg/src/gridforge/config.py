"""JSON scenario files: parsing, defaults, validation and serialization.

Schema (every field except ``network`` is optional)::

    {
      "frame":      {"omega_s": 314.159},
      "network":    {"bus_count": 4,
                     "lines": [{"from": 1, "to": 2, "r": 0.1, "l": 6e-4},
                               {"from": 2, "to": 3, "n": 5, "r": 0.5, "l": 5e-3,
                                "g": 1e-4, "c": 1e-6},
                               {"from": 3, "to": 4,
                                "sections": [{"r": 0.05, "l": 3e-4, "g": 0, "c": 1e-6},
                                             {"r": 0.05, "l": 3e-4}]}],
                     "incidence": [[...]]},
      "inverter":   {"params": {"r_f": 0.1, "l_f": 8e-3, "g_f": 0.00286, "c_f": 5e-5},
                     "virtual_impedance": {"r_v": 0.5, "x_v": 1.0},
                     "gains": "reference" | {"K": [[6 numbers], [6 numbers]], "M": [[2], [2]]},
                     "v_ref": [380.9, 0.0]},
      "tuning":     {"p_max": 125, "lambda_max": -5, "gamma": 1.5, "omega_c": 1e5,
                     "rho_min": 0.0},
      "synthesis":  {"starts": 8, "budget_per_start": 2000, "seed": 0, ...},
      "grid":       {"points": 400, "w_min": 0.1, "w_max": 1e7, "refine": 6},
      "buses":      [{"bus": 1, "type": "inverter", <inverter overrides>},
                     {"bus": 2, "type": "load", "p": 3000, "q": 500, "v_nom": 380.9,
                      "c_shunt": 1e-5, "topology": "series",
                      "switched": [{"p": 4500, "q": 500, "on": false}]},
                     {"bus": 3, "type": "passive", "c_shunt": 1e-5, "g_shunt": 0}],
      "events":     [{"t": 1.0, "type": "load_on", "bus": 2, "element": 0},
                     {"t": 2.0, "type": "broadcast", "v_refs": {"1": [381, 0]}},
                     {"t": 3.0, "type": "plug_in", "bus": 4, "r": 0.01, "l": 1e-4,
                      "inverter": {<inverter overrides>}}],
      "simulation": {"t_end": 5.0, "dt": 1e-5, "stride": 100}
    }

Buses not listed default to passive buses.  ``incidence`` is optional; when
given it must agree with the lines and is checked by the validator.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .certify import FrequencyGrid, TuningSpec, certify_bus
from .dqframe import SyncFrame
from .inverter import (ControllerGains, InverterParams, VirtualImpedance, assemble_plant, augment,
                       close_loop, reference_gains)
from .network import Line, LineSection, NetworkModel, build_network, validate_network
from .sim import (Broadcast, InverterBus, LoadBus, LoadElement, LoadSwitch, PassiveBus, PlugIn,
                  Scenario)
from .synthesize import SynthesisConfig

__all__ = [
    "ConfigError",
    "InverterSpec",
    "PlugInSpec",
    "ScenarioBundle",
    "load_bundle",
    "preset_path",
    "parse_scenario",
    "bundle_from_dict",
    "bundle_to_dict",
    "validate_bundle",
]


class ConfigError(ValueError):
    """Schema violation; the message names the offending field."""


# ---------------------------------------------------------------------------
# field helpers


def _num(d: dict, key: str, where: str, default=None, *, positive=False, nonneg=False) -> float:
    if key not in d:
        if default is None:
            raise ConfigError(f"{where}: missing required field '{key}'")
        return float(default)
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
        raise ConfigError(f"{where}.{key}: expected a finite number, got {v!r}")
    if positive and v <= 0:
        raise ConfigError(f"{where}.{key}: must be positive, got {v}")
    if nonneg and v < 0:
        raise ConfigError(f"{where}.{key}: must be nonnegative, got {v}")
    return float(v)


def _int(d: dict, key: str, where: str, default=None, *, minimum=None) -> int:
    if key not in d:
        if default is None:
            raise ConfigError(f"{where}: missing required field '{key}'")
        return int(default)
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}.{key}: expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{where}.{key}: must be >= {minimum}, got {v}")
    return v


def _obj(d: dict, key: str, where: str) -> dict:
    v = d.get(key, {})
    if not isinstance(v, dict):
        raise ConfigError(f"{where}.{key}: expected an object")
    return v


def _unknown(d: dict, allowed: set[str], where: str) -> None:
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(extra)}")


def _pair(v, where: str) -> tuple[float, float]:
    if (not isinstance(v, (list, tuple)) or len(v) != 2
            or not all(isinstance(a, (int, float)) and not isinstance(a, bool) for a in v)):
        raise ConfigError(f"{where}: expected a [d, q] pair of numbers")
    return float(v[0]), float(v[1])


def _dataclass_from(cls, d: dict, where: str, defaults):
    scalar = [f for f in dataclasses.fields(cls)
              if isinstance(getattr(defaults, f.name), (bool, int, float))]
    _unknown(d, {f.name for f in scalar}, where)
    kw = {}
    for f in scalar:
        if f.name in d:
            dv = getattr(defaults, f.name)
            if isinstance(dv, bool):
                if not isinstance(d[f.name], bool):
                    raise ConfigError(f"{where}.{f.name}: expected true or false")
                kw[f.name] = d[f.name]
            elif isinstance(dv, int):
                kw[f.name] = _int(d, f.name, where)
            else:
                kw[f.name] = _num(d, f.name, where)
    try:
        return dataclasses.replace(defaults, **kw)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


# ---------------------------------------------------------------------------
# domain bundle


@dataclass(frozen=True)
class InverterSpec:
    params: InverterParams = field(default_factory=InverterParams)
    zv: VirtualImpedance = field(default_factory=VirtualImpedance)
    gains: ControllerGains = field(default_factory=reference_gains)
    v_ref: tuple[float, float] = (380.9, 0.0)

    def plant(self, frame: SyncFrame):
        return augment(assemble_plant(self.params, frame), self.zv)

    def closed_loop(self, frame: SyncFrame):
        return close_loop(self.plant(frame), self.gains)

    def key(self) -> tuple:
        return (dataclasses.astuple(self.params), dataclasses.astuple(self.zv),
                tuple(self.gains.as_vector()))

    def __eq__(self, other):
        return isinstance(other, InverterSpec) and self.key() == other.key() \
            and self.v_ref == other.v_ref

    def __hash__(self):
        return hash((self.key(), self.v_ref))


@dataclass(frozen=True)
class PlugInSpec:
    """Plug-in event before its inverter is closed and certified."""

    t: float
    bus: int
    r: float
    l: float
    inverter: InverterSpec


@dataclass
class ScenarioBundle:
    """Everything a scenario file describes, as validated domain objects."""

    frame: SyncFrame
    network: NetworkModel
    inverter: InverterSpec
    tuning: TuningSpec
    synthesis: SynthesisConfig
    grid: FrequencyGrid
    buses: list  # InverterSpec | LoadBus | PassiveBus, bus j at index j-1
    events: list  # LoadSwitch | Broadcast | PlugInSpec
    t_end: float = 1.0
    dt: float = 1e-5
    stride: int = 100
    incidence_given: bool = False

    def _key(self) -> tuple:
        return (self.frame, self.network.bus_count, self.network.lines, self.inverter,
                self.tuning, self.synthesis, self.grid, self.buses, self.events, self.t_end,
                self.dt, self.stride, self.incidence_given)

    def __eq__(self, other):
        if not isinstance(other, ScenarioBundle):
            return NotImplemented
        return (self._key() == other._key()
                and np.array_equal(self.network.H, other.network.H))

    __hash__ = None

    def inverter_specs(self) -> dict[int, InverterSpec]:
        return {j: b for j, b in enumerate(self.buses, 1) if isinstance(b, InverterSpec)}

    def certify_all(self, cache: dict | None = None) -> dict:
        """Certification report for every distinct inverter in the file."""
        cache = {} if cache is None else cache
        specs = [self.inverter, *self.inverter_specs().values()]
        specs += [ev.inverter for ev in self.events if isinstance(ev, PlugInSpec)]
        for s in specs:
            if s.key() not in cache:
                cache[s.key()] = certify_bus(s.closed_loop(self.frame), s.gains, self.tuning,
                                             self.grid)
        return cache

    def to_scenario(self, reports: dict | None = None) -> Scenario:
        """Simulation scenario; inverters carry certificates when they have one."""
        reports = self.certify_all() if reports is None else reports

        def inv_bus(s: InverterSpec) -> InverterBus:
            rep = reports.get(s.key())
            cert = rep.certificate if rep is not None and rep.osp_ok else None
            return InverterBus(s.closed_loop(self.frame), s.v_ref, cert)

        buses = [inv_bus(b) if isinstance(b, InverterSpec) else b for b in self.buses]
        events = []
        for ev in self.events:
            if isinstance(ev, PlugInSpec):
                events.append(PlugIn(ev.t, ev.bus, inv_bus(ev.inverter), ev.r, ev.l))
            else:
                events.append(ev)
        return Scenario(self.network, buses, events, self.t_end, self.dt, self.stride, self.frame)


# ---------------------------------------------------------------------------
# parsing


def _parse_gains(v, where: str) -> ControllerGains:
    if v == "reference":
        return reference_gains()
    if not isinstance(v, dict) or "K" not in v or "M" not in v:
        raise ConfigError(f"{where}: expected \"reference\" or an object with K and M")
    _unknown(v, {"K", "M"}, where)
    try:
        K = np.array(v["K"], dtype=float)
        M = np.array(v["M"], dtype=float)
        return ControllerGains(K, M)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _parse_inverter(d: dict, where: str, base: InverterSpec) -> InverterSpec:
    _unknown(d, {"params", "virtual_impedance", "gains", "v_ref", "bus", "type"}, where)
    params = _dataclass_from(InverterParams, _obj(d, "params", where), f"{where}.params",
                             base.params)
    zv = _dataclass_from(VirtualImpedance, _obj(d, "virtual_impedance", where),
                         f"{where}.virtual_impedance", base.zv)
    gains = _parse_gains(d["gains"], f"{where}.gains") if "gains" in d else base.gains
    v_ref = _pair(d["v_ref"], f"{where}.v_ref") if "v_ref" in d else base.v_ref
    return InverterSpec(params, zv, gains, v_ref)


def _parse_line(d: dict, where: str) -> Line:
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    a = _int(d, "from", where)
    b = _int(d, "to", where)
    if "sections" in d:
        _unknown(d, {"from", "to", "sections"}, where)
        secs = d["sections"]
        if not isinstance(secs, list) or not secs:
            raise ConfigError(f"{where}.sections: expected a non-empty list")
        out = []
        for k, s in enumerate(secs):
            w = f"{where}.sections[{k}]"
            if not isinstance(s, dict):
                raise ConfigError(f"{w}: expected an object")
            _unknown(s, {"r", "l", "g", "c"}, w)
            last = k == len(secs) - 1
            out.append(LineSection(_num(s, "r", w), _num(s, "l", w), _num(s, "g", w, 0.0),
                                   None if last and "c" not in s else _num(s, "c", w)))
        return Line(a, b, tuple(out))
    _unknown(d, {"from", "to", "r", "l", "n", "g", "c"}, where)
    n = _int(d, "n", where, 1, minimum=1)
    r, l = _num(d, "r", where), _num(d, "l", where)
    if n == 1:
        return Line.lumped(a, b, r, l)
    return Line.uniform(a, b, n, r, l, _num(d, "g", where, 0.0), _num(d, "c", where))


def _parse_network(d: dict) -> tuple[NetworkModel, bool]:
    where = "network"
    _unknown(d, {"bus_count", "lines", "incidence"}, where)
    nb = _int(d, "bus_count", where, minimum=1)
    lines = d.get("lines")
    if not isinstance(lines, list):
        raise ConfigError(f"{where}: missing required field 'lines'")
    parsed = [_parse_line(ln, f"{where}.lines[{k}]") for k, ln in enumerate(lines)]
    try:
        net = build_network(nb, parsed, strict=False)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    if "incidence" in d:
        try:
            H = np.array(d["incidence"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}.incidence: {exc}") from exc
        if H.ndim != 2:
            raise ConfigError(f"{where}.incidence: expected a matrix")
        net = dataclasses.replace(net, H=H)
        return net, True
    return net, False


def _parse_bus(d: dict, where: str, base_inv: InverterSpec, v_nom_default: float):
    kind = d.get("type")
    if kind == "inverter":
        return _parse_inverter(d, where, base_inv)
    if kind == "load":
        _unknown(d, {"bus", "type", "p", "q", "v_nom", "c_shunt", "topology", "switched"}, where)
        sw = d.get("switched", [])
        if not isinstance(sw, list):
            raise ConfigError(f"{where}.switched: expected a list")
        elems = []
        for k, e in enumerate(sw):
            w = f"{where}.switched[{k}]"
            if not isinstance(e, dict):
                raise ConfigError(f"{w}: expected an object")
            _unknown(e, {"p", "q", "on"}, w)
            on = e.get("on", True)
            if not isinstance(on, bool):
                raise ConfigError(f"{w}.on: expected true or false")
            elems.append(LoadElement(_num(e, "p", w, nonneg=True), _num(e, "q", w, 0.0, nonneg=True),
                                     on))
        topo = d.get("topology", "series")
        if topo not in ("series", "parallel"):
            raise ConfigError(f"{where}.topology: expected \"series\" or \"parallel\"")
        return LoadBus(_num(d, "p", where, nonneg=True), _num(d, "q", where, 0.0, nonneg=True),
                       _num(d, "v_nom", where, v_nom_default, positive=True),
                       _num(d, "c_shunt", where, 10e-6, positive=True), tuple(elems), topo)
    if kind == "passive":
        _unknown(d, {"bus", "type", "c_shunt", "g_shunt"}, where)
        return PassiveBus(_num(d, "c_shunt", where, 10e-6, positive=True),
                          _num(d, "g_shunt", where, 0.0, nonneg=True))
    raise ConfigError(f"{where}.type: expected \"inverter\", \"load\" or \"passive\", got {kind!r}")


def _parse_event(d: dict, where: str, base_inv: InverterSpec):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    t = _num(d, "t", where)
    if t < 0:
        raise ConfigError(f"{where}.t: event at negative time {t}")
    kind = d.get("type")
    if kind in ("load_on", "load_off"):
        _unknown(d, {"t", "type", "bus", "element"}, where)
        return LoadSwitch(t, _int(d, "bus", where), _int(d, "element", where, 0, minimum=0),
                          kind == "load_on")
    if kind == "broadcast":
        _unknown(d, {"t", "type", "v_refs"}, where)
        refs = d.get("v_refs")
        if not isinstance(refs, dict) or not refs:
            raise ConfigError(f"{where}.v_refs: expected a non-empty object of bus -> [d, q]")
        out = {}
        for k, v in refs.items():
            try:
                j = int(k)
            except ValueError as exc:
                raise ConfigError(f"{where}.v_refs: bus key {k!r} is not an integer") from exc
            out[j] = _pair(v, f"{where}.v_refs.{k}")
        return Broadcast(t, out)
    if kind == "plug_in":
        _unknown(d, {"t", "type", "bus", "r", "l", "inverter"}, where)
        inv = _parse_inverter(_obj(d, "inverter", where), f"{where}.inverter", base_inv)
        return PlugInSpec(t, _int(d, "bus", where), _num(d, "r", where, 0.01, positive=True),
                          _num(d, "l", where, 1e-4, positive=True), inv)
    raise ConfigError(f"{where}.type: unknown event type {kind!r}")


def bundle_from_dict(raw: Any) -> ScenarioBundle:
    """Validate a parsed JSON document and fill in defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected a JSON object")
    _unknown(raw, {"frame", "network", "inverter", "tuning", "synthesis", "grid", "buses",
                   "events", "simulation", "description"}, "top level")
    if "network" not in raw:
        raise ConfigError("top level: missing required field 'network'")
    frame = _dataclass_from(SyncFrame, _obj(raw, "frame", "top level"), "frame", SyncFrame())
    net, given = _parse_network(_obj(raw, "network", "top level"))
    inv = _parse_inverter(_obj(raw, "inverter", "top level"), "inverter", InverterSpec())
    tuning = _dataclass_from(TuningSpec, _obj(raw, "tuning", "top level"), "tuning", TuningSpec())
    synthesis = _dataclass_from(SynthesisConfig, _obj(raw, "synthesis", "top level"), "synthesis",
                                SynthesisConfig(spec=tuning))
    grid = _dataclass_from(FrequencyGrid, _obj(raw, "grid", "top level"), "grid", FrequencyGrid())

    buses: list = [PassiveBus() for _ in range(net.bus_count)]
    seen = set()
    blist = raw.get("buses", [])
    if not isinstance(blist, list):
        raise ConfigError("buses: expected a list")
    for k, b in enumerate(blist):
        where = f"buses[{k}]"
        if not isinstance(b, dict):
            raise ConfigError(f"{where}: expected an object")
        j = _int(b, "bus", where)
        if not 1 <= j <= net.bus_count:
            raise ConfigError(f"{where}.bus: unknown bus {j} (network has {net.bus_count})")
        if j in seen:
            raise ConfigError(f"{where}.bus: bus {j} listed twice")
        seen.add(j)
        buses[j - 1] = _parse_bus(b, where, inv, inv.v_ref[0])

    elist = raw.get("events", [])
    if not isinstance(elist, list):
        raise ConfigError("events: expected a list")
    events = [_parse_event(e, f"events[{k}]", inv) for k, e in enumerate(elist)]
    _check_event_refs(events, buses)

    sim = _obj(raw, "simulation", "top level")
    _unknown(sim, {"t_end", "dt", "stride"}, "simulation")
    t_end = _num(sim, "t_end", "simulation", 1.0, positive=True)
    dt = _num(sim, "dt", "simulation", 1e-5, positive=True)
    stride = _int(sim, "stride", "simulation", 100, minimum=1)
    times = [ev.t for ev in events]
    for k, (a, b) in enumerate(zip(times, times[1:])):
        if b <= a:
            raise ConfigError(f"events[{k + 1}].t: events must be strictly ordered in time")
    if times and times[-1] > t_end:
        raise ConfigError(f"events[{len(times) - 1}].t: event after simulation.t_end")
    return ScenarioBundle(frame, net, inv, tuning, synthesis, grid, buses, events, t_end, dt,
                          stride, given)


def _check_event_refs(events, buses) -> None:
    nb = len(buses)
    for k, ev in enumerate(events):
        where = f"events[{k}]"
        if isinstance(ev, LoadSwitch):
            if not 1 <= ev.bus <= nb or not isinstance(buses[ev.bus - 1], LoadBus):
                raise ConfigError(f"{where}.bus: bus {ev.bus} is not a load bus")
            if ev.element >= len(buses[ev.bus - 1].switched):
                raise ConfigError(f"{where}.element: bus {ev.bus} has no switched load {ev.element}")
        elif isinstance(ev, Broadcast):
            for j in ev.v_refs:
                inv_ok = j > len(buses) or isinstance(buses[j - 1], InverterSpec)
                if not 1 <= j <= nb or not inv_ok:
                    raise ConfigError(f"{where}.v_refs: bus {j} is not an inverter bus")
        else:
            if not 1 <= ev.bus <= nb:
                raise ConfigError(f"{where}.bus: unknown bus {ev.bus}")
            nb += 1


def parse_scenario(path) -> ScenarioBundle:
    """Read and validate a scenario file."""
    text = Path(path).read_text()
    if not text.strip():
        raise ConfigError(f"{path}: top level: missing required field 'network'")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return bundle_from_dict(raw)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


load_bundle = parse_scenario

PRESETS = ("case_study", "plug_and_play", "single_inverter")


def preset_path(name: str) -> Path:
    """Location of a bundled scenario file."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return Path(__file__).with_name("presets") / f"{name}.json"


# ---------------------------------------------------------------------------
# serialization


def _inverter_to_dict(s: InverterSpec) -> dict:
    return {
        "params": dataclasses.asdict(s.params),
        "virtual_impedance": dataclasses.asdict(s.zv),
        "gains": {"K": s.gains.K.tolist(), "M": s.gains.M.tolist()},
        "v_ref": list(s.v_ref),
    }


def _line_to_dict(ln: Line) -> dict:
    secs = []
    for k, s in enumerate(ln.sections):
        d = {"r": s.r, "l": s.l}
        if k < len(ln.sections) - 1:
            d.update(g=s.g, c=s.c)
        secs.append(d)
    return {"from": ln.from_bus, "to": ln.to_bus, "sections": secs}


def bundle_to_dict(b: ScenarioBundle) -> dict:
    """Fully explicit JSON form; parsing it returns an equal bundle."""
    buses = []
    for j, bus in enumerate(b.buses, 1):
        if isinstance(bus, InverterSpec):
            buses.append({"bus": j, "type": "inverter", **_inverter_to_dict(bus)})
        elif isinstance(bus, LoadBus):
            buses.append({"bus": j, "type": "load", "p": bus.p_rated, "q": bus.q_rated,
                          "v_nom": bus.v_nom, "c_shunt": bus.c_shunt, "topology": bus.topology,
                          "switched": [dataclasses.asdict(e) for e in bus.switched]})
        else:
            buses.append({"bus": j, "type": "passive", "c_shunt": bus.c_shunt,
                          "g_shunt": bus.g_shunt})
    events = []
    for ev in b.events:
        if isinstance(ev, LoadSwitch):
            events.append({"t": ev.t, "type": "load_on" if ev.on else "load_off", "bus": ev.bus,
                           "element": ev.element})
        elif isinstance(ev, Broadcast):
            events.append({"t": ev.t, "type": "broadcast",
                           "v_refs": {str(k): list(v) for k, v in ev.v_refs.items()}})
        else:
            events.append({"t": ev.t, "type": "plug_in", "bus": ev.bus, "r": ev.r, "l": ev.l,
                           "inverter": _inverter_to_dict(ev.inverter)})
    syn = dataclasses.asdict(b.synthesis)
    syn.pop("spec")
    net = {"bus_count": b.network.bus_count, "lines": [_line_to_dict(ln) for ln in b.network.lines]}
    if b.incidence_given:
        net["incidence"] = np.asarray(b.network.H).tolist()
    return {
        "frame": dataclasses.asdict(b.frame),
        "network": net,
        "inverter": _inverter_to_dict(b.inverter),
        "tuning": dataclasses.asdict(b.tuning),
        "synthesis": syn,
        "grid": dataclasses.asdict(b.grid),
        "buses": buses,
        "events": events,
        "simulation": {"t_end": b.t_end, "dt": b.dt, "stride": b.stride},
    }


# ---------------------------------------------------------------------------
# validation


def validate_bundle(b: ScenarioBundle, certify: bool = True) -> tuple[list[str], list[str]]:
    """``(errors, warnings)`` for a parsed scenario.

    Errors cover the network invariants; warnings flag inverters that fail
    certification, which is allowed in a simulation but not recommended.
    """
    errors = validate_network(b.network)
    warnings: list[str] = []
    if not errors:
        try:
            build_network(b.network.bus_count, b.network.lines, strict=True)
        except ValueError as exc:
            errors.append(str(exc))
    if certify:
        reports = b.certify_all()
        for j, s in b.inverter_specs().items():
            rep = reports[s.key()]
            if not rep.all_ok:
                warnings.append(f"bus {j}: inverter controller is not certified "
                                f"(hurwitz={rep.hurwitz_ok}, gains={rep.gains_ok}, "
                                f"freq={rep.freq_ok}, osp={rep.osp_ok})")
    return errors, warnings

