"""Simulated color-mixing lab, exposed as an MCP server.

A 96-well plate is mixed from stock dyes. Dye absorption is modeled per
linear-RGB channel with Beer-Lambert attenuation: each channel of the mixed
color is exp(-sum_d fraction_d * od_d), so the rendered color depends only on
volume ratios, not on total volume. Optional Gaussian noise is added in
linear RGB to mimic sensor jitter; a fixed seed reproduces the sequence.

Run standalone:
    python3 -m mcplab.simlab --transport stdio|http [--port N]
                             [--noise-stddev S] [--seed N] [--dye-config FILE]
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from mcplab import color
from mcplab.protocol.tooltypes import (
    ContentBlock,
    PropertySpec,
    ToolCallResult,
    ToolDescriptor,
)
from mcplab.serverkit import McpServer, run_server_cli

WELL_COUNT = 96
WELL_CAPACITY_ML = 2.5

# Optical densities per linear-RGB channel. Calibrated so the stock colors
# render as crimson / pale yellow / indigo and the mixing gamut covers the
# targets used in the docs; treat as device constants.
DEFAULT_DYES = {
    "red": (0.40, 6.40, 2.55),
    "yellow": (0.04, 0.00, 0.82),
    "blue": (3.00, 2.70, 0.87),
}


def format_number(value: float) -> str:
    """Shortest decimal text that parses back to exactly this float."""
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


@dataclass
class DyeModel:
    optical_density: dict[str, tuple[float, float, float]] = field(
        default_factory=lambda: dict(DEFAULT_DYES)
    )

    def __post_init__(self):
        if not self.optical_density:
            raise ValueError("dye model needs at least one dye")
        for name, od in self.optical_density.items():
            if len(od) != 3 or any(c < 0 or not math.isfinite(c) for c in od):
                raise ValueError(f"dye {name!r}: optical density must be 3 floats >= 0")

    @property
    def names(self) -> list[str]:
        return list(self.optical_density)

    def mix_linear(self, volumes: dict[str, float]) -> tuple[float, float, float]:
        total = sum(volumes.values())
        if total <= 0:
            raise ValueError("nothing to mix")
        out = []
        for k in range(3):
            depth = sum(
                (vol / total) * self.optical_density[name][k]
                for name, vol in volumes.items()
            )
            out.append(math.exp(-depth))
        return out[0], out[1], out[2]

    @classmethod
    def from_config_file(cls, path: str) -> "DyeModel":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict) or not raw:
            raise ValueError("dye config must be a non-empty object of name -> [odR, odG, odB]")
        dyes = {}
        for name, od in raw.items():
            if not isinstance(od, list) or len(od) != 3:
                raise ValueError(f"dye {name!r}: expected a 3-element list")
            dyes[name] = (float(od[0]), float(od[1]), float(od[2]))
        return cls(dyes)


def swatch_svg(hex_color: str, size: int = 120) -> bytes:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">'
        f'<rect width="{size}" height="{size}" fill="{hex_color}"/>'
        f'<rect width="{size}" height="{size}" fill="none" stroke="#00000033" stroke-width="2"/>'
        "</svg>"
    ).encode("utf-8")


class SimLab:
    def __init__(
        self,
        dyes: DyeModel | None = None,
        noise_stddev: float = 0.0,
        seed: int | None = None,
    ):
        self.dyes = dyes if dyes is not None else DyeModel()
        self.noise_stddev = float(noise_stddev)
        if self.noise_stddev < 0:
            raise ValueError("noise stddev must be >= 0")
        self._rng = np.random.default_rng(seed)
        self.wells: dict[int, dict[str, float]] = {}
        self.measure_log: list[tuple[int, str]] = []

    def _well_index(self, raw: float) -> int:
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise ValueError("well must be a number")
        if float(raw) != int(raw):
            raise ValueError(f"well must be a whole number, got {raw}")
        idx = int(raw)
        if not 0 <= idx < WELL_COUNT:
            raise ValueError(f"well {idx} out of range 0..{WELL_COUNT - 1}")
        return idx

    def dispense(self, well: float, dye: str, volume_ml: float) -> str:
        idx = self._well_index(well)
        if dye not in self.dyes.optical_density:
            raise ValueError(f"unknown dye {dye!r}; have {', '.join(self.dyes.names)}")
        if not math.isfinite(volume_ml) or volume_ml <= 0:
            raise ValueError(f"volume must be > 0 mL, got {volume_ml}")
        contents = self.wells.setdefault(idx, {})
        new_total = sum(contents.values()) + volume_ml
        if new_total > WELL_CAPACITY_ML + 1e-9:
            raise ValueError(
                f"well {idx} would hold {new_total:.3f} mL, capacity {WELL_CAPACITY_ML} mL"
            )
        contents[dye] = contents.get(dye, 0.0) + volume_ml
        return f"well {idx}: +{format_number(volume_ml)} mL {dye}, total {new_total:.3f} mL"

    def measure(self, well: float) -> str:
        idx = self._well_index(well)
        contents = self.wells.get(idx)
        if not contents:
            raise ValueError(f"well {idx} is empty")
        linear = list(self.dyes.mix_linear(contents))
        if self.noise_stddev > 0:
            noise = self._rng.normal(0.0, self.noise_stddev, size=3)
            linear = [c + n for c, n in zip(linear, noise)]
        rgb = color.linear_to_srgb((linear[0], linear[1], linear[2]))
        hex_color = color.format_hex(rgb)
        self.measure_log.append((idx, hex_color))
        return hex_color

    def wash(self, well: float) -> str:
        idx = self._well_index(well)
        self.wells.pop(idx, None)
        return f"well {idx} washed"

    def reset(self) -> str:
        self.wells.clear()
        return "plate reset"


def build_simlab_server(lab: SimLab | None = None, name: str = "simlab") -> McpServer:
    lab = lab if lab is not None else SimLab()
    server = McpServer(name)

    def wrap(fn):
        def handler(args: dict) -> ToolCallResult:
            try:
                return fn(args)
            except ValueError as exc:
                return ToolCallResult.error(str(exc))

        return handler

    def dispense(args):
        return ToolCallResult.text(
            lab.dispense(args["well"], args["dye"], args["volume_ml"])
        )

    def measure_color(args):
        hex_color = lab.measure(args["well"])
        return ToolCallResult(
            content=[
                ContentBlock.text_block(hex_color),
                ContentBlock.image_block(swatch_svg(hex_color), "image/svg+xml"),
            ]
        )

    def color_difference(args):
        value = color.delta_e_hex(args["hex_a"], args["hex_b"])
        return ToolCallResult.text(format_number(value))

    def wash(args):
        return ToolCallResult.text(lab.wash(args["well"]))

    def reset_plate(args):
        return ToolCallResult.text(lab.reset())

    def list_dyes(args):
        return ToolCallResult.text(", ".join(lab.dyes.names))

    server.register_tool(
        ToolDescriptor(
            "dispense",
            "Add a volume of one stock dye to a well.",
            [
                PropertySpec("well", "number", f"well index, 0..{WELL_COUNT - 1}"),
                PropertySpec("dye", "string", "stock dye name"),
                PropertySpec("volume_ml", "number", "volume in mL, > 0"),
            ],
            ["well", "dye", "volume_ml"],
        ),
        wrap(dispense),
    )
    server.register_tool(
        ToolDescriptor(
            "measure_color",
            "Measure the mixed color of a well; returns the hex color and a swatch image.",
            [PropertySpec("well", "number", f"well index, 0..{WELL_COUNT - 1}")],
            ["well"],
        ),
        wrap(measure_color),
    )
    server.register_tool(
        ToolDescriptor(
            "color_difference",
            "CIEDE2000 difference between two '#RRGGBB' colors; returns the number as text.",
            [
                PropertySpec("hex_a", "string", "first color, '#RRGGBB'"),
                PropertySpec("hex_b", "string", "second color, '#RRGGBB'"),
            ],
            ["hex_a", "hex_b"],
        ),
        wrap(color_difference),
    )
    server.register_tool(
        ToolDescriptor(
            "wash",
            "Empty one well.",
            [PropertySpec("well", "number", f"well index, 0..{WELL_COUNT - 1}")],
            ["well"],
        ),
        wrap(wash),
    )
    server.register_tool(
        ToolDescriptor("reset_plate", "Empty every well on the plate."),
        wrap(reset_plate),
    )
    server.register_tool(
        ToolDescriptor("list_dyes", "Names of the stock dyes, comma separated."),
        wrap(list_dyes),
    )
    return server


def main(argv: list[str] | None = None) -> int:
    def add_args(parser):
        parser.add_argument("--noise-stddev", type=float, default=0.0)
        parser.add_argument("--seed", type=int, default=None)
        parser.add_argument("--dye-config", default=None, help="JSON file: name -> [odR, odG, odB]")

    def build(args):
        dyes = DyeModel.from_config_file(args.dye_config) if args.dye_config else None
        lab = SimLab(dyes=dyes, noise_stddev=args.noise_stddev, seed=args.seed)
        return build_simlab_server(lab)

    return run_server_cli(build, "Simulated color-mixing lab MCP server.", add_args, argv)


if __name__ == "__main__":
    sys.exit(main())
