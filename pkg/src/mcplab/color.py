"""sRGB to CIELAB conversion and the CIEDE2000 color difference.

Math follows the CIE definitions; the CIEDE2000 implementation handles the
usual hue-angle edge cases (discontinuity at 0/360, neutral colors with
undefined hue). D65 white point, 2 degree observer.
"""

from __future__ import annotations

import math

# D65 reference white, scaled so Y = 100.
WHITE_X = 95.047
WHITE_Y = 100.0
WHITE_Z = 108.883

_POW25_7 = 25.0 ** 7


def parse_hex(text: str) -> tuple[int, int, int]:
    """Parse '#RRGGBB' (leading '#' optional) into 8-bit RGB."""
    s = text.strip().lstrip("#")
    if len(s) != 6:
        raise ValueError(f"expected 6 hex digits, got {text!r}")
    try:
        value = int(s, 16)
    except ValueError:
        raise ValueError(f"invalid hex color {text!r}") from None
    return (value >> 16) & 0xFF, (value >> 8) & 0xFF, value & 0xFF


def format_hex(rgb: tuple[int, int, int]) -> str:
    r, g, b = (min(255, max(0, int(round(c)))) for c in rgb)
    return f"#{r:02X}{g:02X}{b:02X}"


def srgb_channel_to_linear(c: float) -> float:
    """Undo the sRGB transfer function. Input and output in [0, 1]."""
    if c <= 0.04045:
        return c / 12.92
    return ((c + 0.055) / 1.055) ** 2.4


def linear_channel_to_srgb(c: float) -> float:
    if c <= 0.0031308:
        return 12.92 * c
    return 1.055 * c ** (1.0 / 2.4) - 0.055


def srgb_to_linear(rgb: tuple[int, int, int]) -> tuple[float, float, float]:
    r, g, b = rgb
    return (
        srgb_channel_to_linear(r / 255.0),
        srgb_channel_to_linear(g / 255.0),
        srgb_channel_to_linear(b / 255.0),
    )


def linear_to_srgb(linear: tuple[float, float, float]) -> tuple[int, int, int]:
    out = []
    for c in linear:
        c = min(1.0, max(0.0, c))
        out.append(int(round(255.0 * linear_channel_to_srgb(c))))
    return out[0], out[1], out[2]


def linear_to_xyz(linear: tuple[float, float, float]) -> tuple[float, float, float]:
    r, g, b = linear
    x = 0.412453 * r + 0.357580 * g + 0.180423 * b
    y = 0.212671 * r + 0.715160 * g + 0.072169 * b
    z = 0.019334 * r + 0.119193 * g + 0.950227 * b
    return 100.0 * x, 100.0 * y, 100.0 * z


def _lab_f(t: float) -> float:
    # Cube root above (6/29)^3, linear continuation below.
    if t > 216.0 / 24389.0:
        return t ** (1.0 / 3.0)
    return t * (841.0 / 108.0) + 4.0 / 29.0


def xyz_to_lab(xyz: tuple[float, float, float]) -> tuple[float, float, float]:
    fx = _lab_f(xyz[0] / WHITE_X)
    fy = _lab_f(xyz[1] / WHITE_Y)
    fz = _lab_f(xyz[2] / WHITE_Z)
    return 116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)


def srgb_to_lab(rgb: tuple[int, int, int]) -> tuple[float, float, float]:
    return xyz_to_lab(linear_to_xyz(srgb_to_linear(rgb)))


def hex_to_lab(text: str) -> tuple[float, float, float]:
    return srgb_to_lab(parse_hex(text))


def ciede2000(
    lab1: tuple[float, float, float], lab2: tuple[float, float, float]
) -> float:
    """CIEDE2000 difference between two Lab colors (kL = kC = kH = 1)."""
    l1, a1, b1 = lab1
    l2, a2, b2 = lab2

    c1 = math.hypot(a1, b1)
    c2 = math.hypot(a2, b2)
    c_bar = 0.5 * (c1 + c2)

    c_bar7 = c_bar ** 7
    g = 0.5 * (1.0 - math.sqrt(c_bar7 / (c_bar7 + _POW25_7)))
    a1p = (1.0 + g) * a1
    a2p = (1.0 + g) * a2
    c1p = math.hypot(a1p, b1)
    c2p = math.hypot(a2p, b2)

    h1p = _hue_deg(a1p, b1)
    h2p = _hue_deg(a2p, b2)

    dl = l2 - l1
    dc = c2p - c1p

    # Hue difference: undefined when either chroma vanishes.
    if c1p * c2p == 0.0:
        dh = 0.0
    else:
        dh = h2p - h1p
        if dh > 180.0:
            dh -= 360.0
        elif dh < -180.0:
            dh += 360.0
    dhh = 2.0 * math.sqrt(c1p * c2p) * math.sin(math.radians(dh) / 2.0)

    l_bar = 0.5 * (l1 + l2)
    c_barp = 0.5 * (c1p + c2p)

    if c1p * c2p == 0.0:
        h_bar = h1p + h2p
    else:
        h_bar = 0.5 * (h1p + h2p)
        if abs(h1p - h2p) > 180.0:
            # Mean hue wraps around 0/360.
            if h1p + h2p < 360.0:
                h_bar += 180.0
            else:
                h_bar -= 180.0

    t = (
        1.0
        - 0.17 * math.cos(math.radians(h_bar - 30.0))
        + 0.24 * math.cos(math.radians(2.0 * h_bar))
        + 0.32 * math.cos(math.radians(3.0 * h_bar + 6.0))
        - 0.20 * math.cos(math.radians(4.0 * h_bar - 63.0))
    )

    d_theta = 30.0 * math.exp(-(((h_bar - 275.0) / 25.0) ** 2))
    c_barp7 = c_barp ** 7
    r_c = 2.0 * math.sqrt(c_barp7 / (c_barp7 + _POW25_7))
    r_t = -math.sin(math.radians(2.0 * d_theta)) * r_c

    lm50 = (l_bar - 50.0) ** 2
    s_l = 1.0 + 0.015 * lm50 / math.sqrt(20.0 + lm50)
    s_c = 1.0 + 0.045 * c_barp
    s_h = 1.0 + 0.015 * c_barp * t

    term_l = dl / s_l
    term_c = dc / s_c
    term_h = dhh / s_h
    return math.sqrt(
        term_l * term_l + term_c * term_c + term_h * term_h + r_t * term_c * term_h
    )


def _hue_deg(ap: float, b: float) -> float:
    if ap == 0.0 and b == 0.0:
        return 0.0
    h = math.degrees(math.atan2(b, ap))
    return h + 360.0 if h < 0.0 else h


def delta_e_hex(hex_a: str, hex_b: str) -> float:
    """CIEDE2000 between two '#RRGGBB' colors."""
    return ciede2000(hex_to_lab(hex_a), hex_to_lab(hex_b))
