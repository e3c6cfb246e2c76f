"""
Dataset Presets

Label maps for the two public benchmarks. Recordings are not shipped;
these presets name the classes, the nominal sampling rate and the source
recording each label is conventionally cut from, so converted archives
carry consistent label indices.

CWRU: 12 kHz drive-end, 1790 rpm, 0 hp. Ball / inner / outer race faults
at 0.18, 0.355 and 0.533 mm plus the normal baseline.

PU: 64 kHz, N15_M07_F04 operating point. Two selections circulate for the
same study (a 14-code table and a six-state list); both are provided and
neither is treated as canonical.
"""

from dataclasses import dataclass
from typing import Dict, List, Tuple

from rashvit.src.errors import ConfigError


@dataclass(frozen=True)
class ClassInfo:
    """One label of a preset."""
    code: str                 # short name written into manifests
    fault_mode: str
    description: str = ""
    source_hint: str = ""     # conventional source recording (e.g. CWRU file number)


@dataclass(frozen=True)
class DatasetPreset:
    name: str
    sample_rate_hz: float
    classes: Tuple[ClassInfo, ...]

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def class_names(self) -> List[str]:
        return [c.code for c in self.classes]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "sample_rate_hz": self.sample_rate_hz,
            "classes": [
                {
                    "label": i,
                    "code": c.code,
                    "fault_mode": c.fault_mode,
                    "description": c.description,
                    "source_hint": c.source_hint,
                }
                for i, c in enumerate(self.classes)
            ],
        }


# =============================================================================
# CWRU (10 classes)
# =============================================================================

CWRU = DatasetPreset(
    name="cwru",
    sample_rate_hz=12_000.0,
    classes=(
        ClassInfo("B007", "Rolling element fault", "0.18 mm", "118.mat"),
        ClassInfo("B014", "Rolling element fault", "0.355 mm", "185.mat"),
        ClassInfo("B021", "Rolling element fault", "0.533 mm", "222.mat"),
        ClassInfo("IR007", "Inner ring fault", "0.18 mm", "105.mat"),
        ClassInfo("IR014", "Inner ring fault", "0.355 mm", "169.mat"),
        ClassInfo("IR021", "Inner ring fault", "0.533 mm", "209.mat"),
        ClassInfo("OR007", "Outer ring fault", "0.18 mm, centred @6:00", "130.mat"),
        ClassInfo("OR014", "Outer ring fault", "0.355 mm, centred @6:00", "197.mat"),
        ClassInfo("OR021", "Outer ring fault", "0.533 mm, centred @6:00", "234.mat"),
        ClassInfo("NORMAL", "Normal", "baseline", "97.mat"),
    ),
)

# =============================================================================
# PADERBORN
# =============================================================================

_FATIGUE = "Caused by fatigue and pitting"
_PLASTIC = "Caused by plastic deform and indentation"

PU14 = DatasetPreset(
    name="pu14",
    sample_rate_hz=64_000.0,
    classes=(
        ClassInfo("KA04", "Outer ring damage", _FATIGUE, "N15_M07_F04_KA04"),
        ClassInfo("KA15", "Outer ring damage", _PLASTIC, "N15_M07_F04_KA15"),
        ClassInfo("KA16", "Outer ring damage", _FATIGUE, "N15_M07_F04_KA16"),
        ClassInfo("KA22", "Outer ring damage", _FATIGUE, "N15_M07_F04_KA22"),
        ClassInfo("KA30", "Outer ring damage", _PLASTIC, "N15_M07_F04_KA30"),
        ClassInfo("KB23", "Outer and inner ring damage", _FATIGUE, "N15_M07_F04_KB23"),
        ClassInfo("KB24", "Outer and inner ring damage", _FATIGUE, "N15_M07_F04_KB24"),
        ClassInfo("KB27", "Outer and inner ring damage", _PLASTIC, "N15_M07_F04_KB27"),
        ClassInfo("KI14", "Inner ring damage", _FATIGUE, "N15_M07_F04_KI14"),
        ClassInfo("KI16", "Inner ring damage", _FATIGUE, "N15_M07_F04_KI16"),
        ClassInfo("KI17", "Inner ring damage", _FATIGUE, "N15_M07_F04_KI17"),
        ClassInfo("KI18", "Inner ring damage", _FATIGUE, "N15_M07_F04_KI18"),
        ClassInfo("KI21", "Inner ring damage", _FATIGUE, "N15_M07_F04_KI21"),
        ClassInfo("KI04", "Inner ring damage", _FATIGUE, "N15_M07_F04_KI04"),
    ),
)

PU6 = DatasetPreset(
    name="pu6",
    sample_rate_hz=64_000.0,
    classes=(
        ClassInfo("K001", "Healthy", "run-in baseline", "N15_M07_F04_K001"),
        ClassInfo("KA01", "Outer ring damage", "artificial, EDM", "N15_M07_F04_KA01"),
        ClassInfo("KA03", "Outer ring damage", "artificial, electric engraver", "N15_M07_F04_KA03"),
        ClassInfo("KA07", "Outer ring damage", "artificial, drilling", "N15_M07_F04_KA07"),
        ClassInfo("KI01", "Inner ring damage", "artificial, EDM", "N15_M07_F04_KI01"),
        ClassInfo("KI03", "Inner ring damage", "artificial, electric engraver", "N15_M07_F04_KI03"),
    ),
)

PRESETS: Dict[str, DatasetPreset] = {p.name: p for p in (CWRU, PU14, PU6)}


def get_preset(name: str) -> DatasetPreset:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise ConfigError(f"unknown dataset preset {name!r} (expected one of {sorted(PRESETS)})")
