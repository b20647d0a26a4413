"""
Преобразования цвета RGB <-> HSV для массивов numpy

Все каналы в [0, 1]; тон - доля полного круга.
"""

import numpy as np


def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """[..., 3] RGB -> [..., 3] HSV"""
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    high = rgb.max(axis=-1)
    low = rgb.min(axis=-1)
    delta = high - low

    safe = np.where(delta > 0, delta, 1.0)
    hue = np.where(high == r, ((g - b) / safe) % 6.0,
                   np.where(high == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0))
    hue = np.where(delta > 0, hue / 6.0, 0.0)
    saturation = np.where(high > 0, delta / np.where(high > 0, high, 1.0), 0.0)
    return np.stack([hue, saturation, high], axis=-1)


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    """[..., 3] HSV -> [..., 3] RGB"""
    hsv = np.asarray(hsv, dtype=np.float64)
    h, s, v = hsv[..., 0] % 1.0, hsv[..., 1], hsv[..., 2]
    sector = np.floor(h * 6.0)
    f = h * 6.0 - sector
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    sector = sector.astype(np.int64) % 6

    choices_r = [v, q, p, p, t, v]
    choices_g = [t, v, v, q, p, p]
    choices_b = [p, p, t, v, v, q]
    conditions = [sector == i for i in range(6)]
    return np.stack([
        np.select(conditions, choices_r),
        np.select(conditions, choices_g),
        np.select(conditions, choices_b),
    ], axis=-1)


def adjust_hsv(
    image: np.ndarray,
    hue_shift: float = 0.0,
    saturation_scale: float = 1.0,
    value_scale: float = 1.0
) -> np.ndarray:
    """
    Сдвиг тона и масштаб насыщенности/яркости

    Args:
        image: RGB [..., 3] в [0, 1]
        hue_shift: Сдвиг тона, доля круга
        saturation_scale: Множитель насыщенности
        value_scale: Множитель яркости

    Returns:
        RGB [..., 3] в [0, 1]
    """
    hsv = rgb_to_hsv(image)
    hsv[..., 0] = (hsv[..., 0] + hue_shift) % 1.0
    hsv[..., 1] = np.clip(hsv[..., 1] * saturation_scale, 0.0, 1.0)
    hsv[..., 2] = np.clip(hsv[..., 2] * value_scale, 0.0, 1.0)
    return hsv_to_rgb(hsv)
