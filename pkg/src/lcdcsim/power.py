"""Static data-center power breakdown and whole-site savings projection.

Five network inventories ship as INI files under ``data/power``. Server
power is ``peak x curve(utilization) x ladder factor``; network components
draw constant power. The optimization ladder multiplies per-class factors
step by step (CMOS scaling, stacked memory, 3D NAND, specialized compute).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

CLASSES = ("servers", "switch_asic", "nic", "switch_phy", "transceivers")

#: Share of server peak power by subsystem (a modeling choice).
SERVER_SPLIT = {"compute": 0.5, "memory": 0.3, "storage": 0.1, "other": 0.1}


class PowerModelError(ValueError):
    pass


@dataclass(frozen=True)
class Wattages:
    phy_w: float = 0.8
    asic_w: float = 28.0
    nic_w: float = 10.0
    sfp_w: float = 1.0
    qsfp_w: float = 2.4
    server_peak_w: float = 300.0

    def __post_init__(self) -> None:
        for name in ("phy_w", "asic_w", "nic_w", "sfp_w", "qsfp_w", "server_peak_w"):
            if not getattr(self, name) > 0:
                raise PowerModelError(f"{name} must be positive")


@dataclass(frozen=True)
class ComponentInventory:
    name: str
    servers: int
    switches: int
    switch_ports: int
    sfp_transceivers: int
    qsfp_transceivers: int
    nics: int
    watts: Wattages = field(default_factory=Wattages)

    def __post_init__(self) -> None:
        for name in ("servers", "switches", "switch_ports", "sfp_transceivers", "qsfp_transceivers", "nics"):
            if getattr(self, name) < 0:
                raise PowerModelError(f"{self.name}: {name} must be >= 0")

    def network_watts(self, electronics: float = 1.0) -> dict[str, float]:
        w = self.watts
        return {
            "switch_asic": self.switches * w.asic_w * electronics,
            "nic": self.nics * w.nic_w * electronics,
            "switch_phy": self.switch_ports * w.phy_w * electronics,
            "transceivers": self.sfp_transceivers * w.sfp_w + self.qsfp_transceivers * w.qsfp_w,
        }


@dataclass(frozen=True)
class ServerPowerCurve:
    name: str
    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        us = [u for u, _ in self.points]
        fs = [f for _, f in self.points]
        if us[0] != 0.0 or us[-1] != 1.0 or any(b <= a for a, b in zip(us, us[1:])):
            raise PowerModelError(f"{self.name}: utilization points must rise strictly from 0 to 1")
        if any(b < a for a, b in zip(fs, fs[1:])):
            raise PowerModelError(f"{self.name}: power fraction must be non-decreasing")
        if fs[-1] != 1.0 or fs[0] < 0:
            raise PowerModelError(f"{self.name}: power fraction must end at 1.0 at full load")

    def __call__(self, utilization: float) -> float:
        if not 0 <= utilization <= 1:
            raise PowerModelError("utilization must be in [0, 1]")
        us, fs = zip(*self.points)
        return float(np.interp(utilization, us, fs))


# Energy-proportional curve above 30% comes from calibrate_ladder(); see below.
EP_MID = (0.5720, 0.6706)

CURVES = {
    "peak": ServerPowerCurve("peak", ((0.0, 1.0), (1.0, 1.0))),
    "2013": ServerPowerCurve("2013", ((0.0, 0.55), (0.3, 0.70), (1.0, 1.0))),
    "sr665": ServerPowerCurve("sr665", ((0.0, 0.40), (0.3, 0.58), (1.0, 1.0))),
    "energy-proportional": ServerPowerCurve(
        "energy-proportional", ((0.0, 0.10), (0.3, 0.40), (0.5, EP_MID[0]), (0.7, EP_MID[1]), (1.0, 1.0))
    ),
}


@dataclass(frozen=True)
class OptimizationScenario:
    name: str = "none"
    server_compute: float = 1.0
    server_memory: float = 1.0
    server_storage: float = 1.0
    electronics: float = 1.0  # switch ASIC, PHY and NIC electronics
    server_other: float = 1.0  # board electronics: regulators, fans, BMC

    def __post_init__(self) -> None:
        for name in ("server_compute", "server_memory", "server_storage", "electronics", "server_other"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise PowerModelError(f"{name} factor must be in (0, 1], got {value}")

    def server_factor(self) -> float:
        s = SERVER_SPLIT
        return (s["compute"] * self.server_compute + s["memory"] * self.server_memory
                + s["storage"] * self.server_storage + s["other"] * self.server_other)


# Ladder step factors. Memory, storage and specialized compute are fixed
# modeling choices; CMOS compute/electronics factors come from calibration.
# CMOS scaling applies to both compute and the server's board electronics.
HMC_MEMORY = 0.1
NAND_STORAGE = 0.1
SPECIALIZED_COMPUTE = 0.5
CMOS_COMPUTE = 0.1203
CMOS_ELECTRONICS = 0.4136


def ladder(cmos_compute: float = CMOS_COMPUTE, cmos_electronics: float = CMOS_ELECTRONICS
           ) -> list[tuple[str, str, OptimizationScenario]]:
    """``(label, curve name, scenario)`` for each bar, cumulative."""
    none = OptimizationScenario("none")
    cmos = replace(none, name="cmos", server_compute=cmos_compute, server_other=cmos_compute,
                   electronics=cmos_electronics)
    hmc = replace(cmos, name="hmc-memory", server_memory=HMC_MEMORY)
    nand = replace(hmc, name="3d-nand", server_storage=NAND_STORAGE)
    special = replace(nand, name="specialized-compute", server_compute=cmos_compute * SPECIALIZED_COMPUTE)
    return [
        ("peak servers", "peak", none),
        ("2013 server", "2013", none),
        ("SR665 server", "sr665", none),
        ("energy-proportional server", "energy-proportional", none),
        ("CMOS scaling", "energy-proportional", cmos),
        ("stacked memory", "energy-proportional", hmc),
        ("3D NAND storage", "energy-proportional", nand),
        ("specialized compute", "energy-proportional", special),
    ]


def final_scenario() -> OptimizationScenario:
    return ladder()[-1][2]


def breakdown(inventory: ComponentInventory, curve: ServerPowerCurve | str, utilization: float,
              scenario: OptimizationScenario | None = None) -> dict[str, float]:
    """Power share of each class; cooling and power delivery are excluded."""
    if isinstance(curve, str):
        curve = CURVES[curve]
    scenario = scenario or OptimizationScenario()
    watts = inventory.network_watts(scenario.electronics)
    watts["servers"] = (inventory.servers * inventory.watts.server_peak_w * curve(utilization)
                        * scenario.server_factor())
    total = sum(watts.values())
    if total <= 0:
        raise PowerModelError(f"{inventory.name}: inventory draws no power")
    return {k: watts[k] / total for k in CLASSES}


def overall_savings(transceiver_share: float, network_savings: float, include_phy_nic: bool = False,
                    phy_nic_share: float = 0.0) -> float:
    for name, value in (("transceiver_share", transceiver_share), ("network_savings", network_savings),
                        ("phy_nic_share", phy_nic_share)):
        if not 0 <= value <= 1:
            raise PowerModelError(f"{name} must be in [0, 1], got {value}")
    eligible = transceiver_share + (phy_nic_share if include_phy_nic else 0.0)
    if eligible > 1 + 1e-12:
        raise PowerModelError("eligible share exceeds 1")
    return eligible * network_savings


def switch_transceiver_fraction(ports: int = 64, transceiver_w: float = 1.0, switch_avg_w: float = 140.0) -> float:
    """Fraction of a switch's draw spent on optics when the box averages ``switch_avg_w``."""
    optics = ports * transceiver_w
    return optics / (switch_avg_w + optics)


# ---------------------------------------------------------------- inventories on disk


def load_inventory(path, watts: Wattages | None = None) -> ComponentInventory:
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(path.read_text(), source=str(path))
    except (OSError, configparser.Error) as exc:
        raise PowerModelError(f"cannot read inventory {path}: {exc}") from None
    return _inventory_from(parser, str(path), watts)


def _inventory_from(parser, source: str, watts: Wattages | None) -> ComponentInventory:
    if "inventory" not in parser:
        raise PowerModelError(f"{source}: missing [inventory] section")
    sec = parser["inventory"]
    ints = ("servers", "switches", "switch_ports", "sfp_transceivers", "qsfp_transceivers", "nics")
    unknown = set(sec) - set(ints) - {"name"}
    if unknown:
        raise PowerModelError(f"{source}: unknown keys {sorted(unknown)}")
    try:
        values = {k: int(sec[k]) for k in ints}
    except KeyError as exc:
        raise PowerModelError(f"{source}: missing key {exc}") from None
    except ValueError as exc:
        raise PowerModelError(f"{source}: {exc}") from None
    return ComponentInventory(sec.get("name", Path(source).stem), watts=watts or Wattages(), **values)


DESIGNS = ("clos-fb", "flattened-butterfly", "fat-tree-1", "fat-tree-2", "fat-tree-3")


def shipped_inventories(watts: Wattages | None = None) -> list[ComponentInventory]:
    base = resources.files("lcdcsim") / "data" / "power"
    out = []
    for name in DESIGNS:
        parser = configparser.ConfigParser(interpolation=None)
        parser.read_string((base / f"{name}.ini").read_text(), source=name)
        out.append(_inventory_from(parser, name, watts))
    return out


# ---------------------------------------------------------------- site-wide projection


@dataclass
class SavingsRow:
    utilization: float
    transceiver_share: float
    phy_nic_share: float
    server_share: float
    savings_transceivers: float
    savings_with_phy_nic: float


def average_shares(inventories: Sequence[ComponentInventory], curve, utilization: float,
                   scenario: OptimizationScenario) -> dict[str, float]:
    parts = [breakdown(inv, curve, utilization, scenario) for inv in inventories]
    return {k: sum(p[k] for p in parts) / len(parts) for k in CLASSES}


def savings_table(network_savings: float, utilizations: Sequence[float] = (0.3, 0.5, 0.7),
                  inventories: Sequence[ComponentInventory] | None = None,
                  curve: str = "energy-proportional",
                  scenario: OptimizationScenario | None = None) -> list[SavingsRow]:
    """Site-wide savings averaged across network designs, per server utilization."""
    inventories = inventories or shipped_inventories()
    scenario = scenario or final_scenario()
    rows = []
    for u in utilizations:
        sh = average_shares(inventories, curve, u, scenario)
        phy_nic = sh["switch_phy"] + sh["nic"]
        rows.append(SavingsRow(
            utilization=u,
            transceiver_share=sh["transceivers"],
            phy_nic_share=phy_nic,
            server_share=sh["servers"],
            savings_transceivers=overall_savings(sh["transceivers"], network_savings),
            savings_with_phy_nic=overall_savings(sh["transceivers"], network_savings, True, phy_nic),
        ))
    return rows


def ladder_table(inventory: ComponentInventory, utilization: float = 0.3) -> list[tuple[str, dict[str, float]]]:
    """Stacked shares for each ladder bar (the peak bar ignores utilization)."""
    return [(label, breakdown(inventory, curve, utilization, sc)) for label, curve, sc in ladder()]


# ---------------------------------------------------------------- calibration

CALIBRATION_TARGETS = {
    # average over designs of the transceiver share at 30% utilization
    "transceivers@0.3": 0.20,
    # average over designs of transceiver + PHY + NIC share at 30/50/70%
    "optics+phy+nic@0.3": 0.46,
    "optics+phy+nic@0.5": 0.23 / 0.60,
    "optics+phy+nic@0.7": 0.21 / 0.60,
}


def _shares_for(params, inventories):
    c, e, f5, f7 = params
    curve = ServerPowerCurve("ep", ((0.0, 0.10), (0.3, 0.40), (0.5, f5), (0.7, f7), (1.0, 1.0)))
    sc = OptimizationScenario("cal", server_compute=c * SPECIALIZED_COMPUTE, server_memory=HMC_MEMORY,
                              server_storage=NAND_STORAGE, electronics=e, server_other=c)
    out = []
    for u in (0.3, 0.5, 0.7):
        sh = average_shares(inventories, curve, u, sc)
        out.append(sh)
    return out


def calibrate_ladder(inventories: Sequence[ComponentInventory] | None = None) -> tuple[float, float, float, float]:
    """Solve for (CMOS compute, CMOS electronics, EP f(0.5), EP f(0.7)).

    Used offline to freeze the module defaults; the tests re-run it and
    check the frozen values still reproduce the targets.
    """
    from scipy.optimize import least_squares

    inventories = inventories or shipped_inventories()
    t = CALIBRATION_TARGETS

    def residual(p):
        s3, s5, s7 = _shares_for(p, inventories)
        pn = lambda s: s["transceivers"] + s["switch_phy"] + s["nic"]  # noqa: E731
        return [s3["transceivers"] - t["transceivers@0.3"], pn(s3) - t["optics+phy+nic@0.3"],
                pn(s5) - t["optics+phy+nic@0.5"], pn(s7) - t["optics+phy+nic@0.7"]]

    fit = least_squares(residual, x0=[0.3, 0.3, 0.6, 0.8],
                        bounds=([1e-3, 1e-3, 0.40, 0.40], [1.0, 1.0, 1.0, 1.0]))
    return tuple(float(x) for x in fit.x)


# ---------------------------------------------------------------- power scenario files


@dataclass(frozen=True)
class PowerScenario:
    network_savings: float = 0.60
    utilizations: tuple[float, ...] = (0.3, 0.5, 0.7)
    curve: str = "energy-proportional"
    designs: tuple[str, ...] = DESIGNS
    watts: Wattages = field(default_factory=Wattages)

    def inventories(self) -> list[ComponentInventory]:
        by_name = dict(zip(DESIGNS, shipped_inventories(self.watts)))
        return [by_name[d] for d in self.designs]


def parse_power_scenario(text: str, source: str = "<scenario>") -> PowerScenario:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise PowerModelError(f"{source}: {exc}") from None
    unknown = set(parser.sections()) - {"power", "wattage"}
    if unknown:
        raise PowerModelError(f"{source}: unknown sections {sorted(unknown)}")
    kwargs = {}
    if "power" in parser:
        sec = parser["power"]
        extra = set(sec) - {"network_savings", "utilizations", "curve", "designs"}
        if extra:
            raise PowerModelError(f"{source}: unknown keys {sorted(extra)} in [power]")
        try:
            if "network_savings" in sec:
                kwargs["network_savings"] = float(sec["network_savings"])
            if "utilizations" in sec:
                kwargs["utilizations"] = tuple(float(x) for x in sec["utilizations"].replace(",", " ").split())
        except ValueError as exc:
            raise PowerModelError(f"{source}: {exc}") from None
        if "curve" in sec:
            kwargs["curve"] = sec["curve"].strip()
        if "designs" in sec:
            kwargs["designs"] = tuple(sec["designs"].replace(",", " ").split())
    if "wattage" in parser:
        sec = parser["wattage"]
        names = {f for f in Wattages.__dataclass_fields__}
        extra = set(sec) - names
        if extra:
            raise PowerModelError(f"{source}: unknown keys {sorted(extra)} in [wattage]")
        try:
            kwargs["watts"] = Wattages(**{k: float(v) for k, v in sec.items()})
        except ValueError as exc:
            raise PowerModelError(f"{source}: {exc}") from None
    scenario = PowerScenario(**kwargs)
    if not 0 <= scenario.network_savings <= 1:
        raise PowerModelError(f"{source}: network_savings must be in [0, 1]")
    if not scenario.utilizations or any(not 0 <= u <= 1 for u in scenario.utilizations):
        raise PowerModelError(f"{source}: utilizations must be in [0, 1]")
    if scenario.curve not in CURVES:
        raise PowerModelError(f"{source}: unknown curve {scenario.curve!r}")
    bad = [d for d in scenario.designs if d not in DESIGNS]
    if bad or not scenario.designs:
        raise PowerModelError(f"{source}: unknown designs {bad}; choose from {', '.join(DESIGNS)}")
    return scenario


def load_power_scenario(path) -> PowerScenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise PowerModelError(f"cannot read {path}: {exc.strerror}") from None
    return parse_power_scenario(text, str(path))
