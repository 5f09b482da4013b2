"""Monotone heteroclinic profiles for Nicholson's blowflies with delayed harvesting."""

import logging
import os
from dataclasses import dataclass, field, asdict
from datetime import datetime
from pathlib import Path

import yaml
from dotenv import load_dotenv

load_dotenv()

# ── Path constants ──────────────────────────────────────────────────────────

ROOT_DIR = Path(__file__).resolve().parent.parent
DATA_DIR = ROOT_DIR / "data"
RESULTS_DIR = Path(os.environ.get("NICHOLSON_RESULTS_DIR", DATA_DIR / "results"))
LOGS_DIR = DATA_DIR / "logs"

for d in [RESULTS_DIR, LOGS_DIR]:
    d.mkdir(parents=True, exist_ok=True)


# ── Logging ─────────────────────────────────────────────────────────────────

def setup_logging(run_id: str | None = None) -> logging.Logger:
    """Configure package logging to console and file."""
    logger = logging.getLogger("nicholson")
    if logger.handlers:
        return logger
    logger.setLevel(logging.DEBUG)

    fmt = logging.Formatter("%(asctime)s %(levelname)-8s %(name)s | %(message)s",
                            datefmt="%H:%M:%S")

    console = logging.StreamHandler()
    console.setLevel(os.environ.get("NICHOLSON_LOG_LEVEL", "INFO").upper())
    console.setFormatter(fmt)
    logger.addHandler(console)

    if run_id:
        fh = logging.FileHandler(LOGS_DIR / f"{run_id}.log")
        fh.setLevel(logging.DEBUG)
        fh.setFormatter(fmt)
        logger.addHandler(fh)

    return logger


def generate_run_id() -> str:
    return datetime.now().strftime("%Y%m%d_%H%M%S")


# ── Config loader ───────────────────────────────────────────────────────────

def load_config(path: Path | None = None) -> dict:
    """Load config.yaml (or a preset) as a plain dict.

    Raises ConfigError if the file is missing, unparsable, or not a mapping.
    """
    path = Path(path) if path else ROOT_DIR / "config.yaml"
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} is not a mapping")
    return data


# ── Exceptions ──────────────────────────────────────────────────────────────

class NicholsonError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(NicholsonError, ValueError):
    """A model constant or derived rate lies outside its domain."""


class InfeasibleError(NicholsonError):
    """A hypothesis of the existence theorem is violated."""


class KinkError(NicholsonError, ValueError):
    """A residual was requested exactly at a kink of an upper/lower solution."""


class GridError(NicholsonError, ValueError):
    """Invalid grid, misaligned delay, or mismatched profiles."""


class ConfigError(NicholsonError):
    """Unreadable or malformed configuration / profile file."""


class BlowUpError(NicholsonError, ArithmeticError):
    """Forward integration produced a non-finite state."""


class MonotonicityBreach(NicholsonError):
    """An iterate left the order interval or lost monotonicity."""

    def __init__(self, message: str, step: int, node: int, t: float):
        super().__init__(f"{message} (step {step}, node {node}, t={t:.6g})")
        self.step = step
        self.node = node
        self.t = t


# ── Check reports ───────────────────────────────────────────────────────────

@dataclass
class CheckItem:
    """One certified condition: a signed margin plus the formula it measures."""
    name: str
    margin: float
    formula: str = ""
    strict: bool = False    # open inequality: margin == 0 fails
    gating: bool = True     # advisory items only WARN
    detail: str = ""

    @property
    def passed(self) -> bool:
        if self.margin != self.margin:  # NaN
            return False
        return self.margin > 0 if self.strict else self.margin >= 0

    @property
    def status(self) -> str:
        if self.passed:
            return "PASS"
        return "FAIL" if self.gating else "WARN"


@dataclass
class CheckReport:
    """Ordered collection of CheckItems shared by model, bounds and verify."""
    items: list[CheckItem] = field(default_factory=list)

    def add(self, name: str, margin: float, formula: str = "", **kwargs) -> CheckItem:
        item = CheckItem(name=name, margin=float(margin), formula=formula, **kwargs)
        self.items.append(item)
        return item

    def extend(self, other: "CheckReport") -> "CheckReport":
        self.items.extend(other.items)
        return self

    def __getitem__(self, name: str) -> CheckItem:
        for item in self.items:
            if item.name == name:
                return item
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(item.name == name for item in self.items)

    @property
    def all_passed(self) -> bool:
        return all(item.passed for item in self.items if item.gating)

    def failures(self) -> list[CheckItem]:
        return [item for item in self.items if not item.passed]

    def lines(self) -> list[str]:
        width = max((len(i.name) for i in self.items), default=0)
        out = []
        for i in self.items:
            line = f"{i.name:<{width}}  {i.status:<4}  {i.margin: .6e}  {i.formula}"
            if i.detail:
                line += f"  [{i.detail}]"
            out.append(line.rstrip())
        return out

    def to_dict(self) -> dict:
        return {i.name: {**asdict(i), "passed": i.passed} for i in self.items}
