"""Adapter width schedules.

The depth-aware ("telescopic") schedule hands small bottlenecks to shallow
encoder layers and widens them toward the top of the stack; the text and
conditional branches get fixed reduced widths. Every scheduled width is
finally clamped against the hosting feature width d so the bottleneck never
exceeds d/4 and never drops below 8.
"""

from __future__ import annotations

from ..errors import ConfigError, ParameterError

MIN_BOTTLENECK = 8


def clip_bottleneck(d_adapter: int, d: int) -> int:
    """Effective bottleneck width: max(8, min(d_adapter, floor(d/4)))."""
    if d < 8:
        raise ConfigError(
            f"feature width {d} too small: the minimum bottleneck of "
            f"{MIN_BOTTLENECK} would exceed floor(d/4)"
        )
    return max(MIN_BOTTLENECK, min(int(d_adapter), d // 4))


def telescopic_vision_dims(d_base: int, n_layers: int) -> list[int]:
    """Scheduled width per adapted vision layer: max(8, floor(d_base*i/(2*L)))."""
    if d_base < 8 or n_layers < 1:
        raise ParameterError(
            f"need d_base >= 8 and at least one layer, got ({d_base}, {n_layers})"
        )
    return [max(MIN_BOTTLENECK, (d_base * i) // (2 * n_layers)) for i in range(1, n_layers + 1)]


def text_adapter_dim(d_base: int) -> int:
    """Static width for the adapted text layers: max(8, floor(d_base/4))."""
    if d_base < 1:
        raise ParameterError(f"d_base must be positive, got {d_base}")
    return max(8, d_base // 4)


def conditional_adapter_dim(d_base: int) -> int:
    """Width for the single post-projection adapter: max(16, floor(d_base/8))."""
    if d_base < 1:
        raise ParameterError(f"d_base must be positive, got {d_base}")
    return max(16, d_base // 8)


def alternate_vision_dim(d_base: int, n_extract: int, i: int) -> int:
    """Progressive width over extracted layers: max(8, floor(d_base*i/N))."""
    if not 1 <= i <= n_extract:
        raise ParameterError(f"extract index {i} outside [1, {n_extract}]")
    return max(MIN_BOTTLENECK, (d_base * i) // n_extract)


def pooled_text_adapter_dim(d_base: int) -> int:
    """Width of the single pooled-text adapter: max(16, floor(d_base/4))."""
    if d_base < 1:
        raise ParameterError(f"d_base must be positive, got {d_base}")
    return max(16, d_base // 4)


def shared_cross_modal_dim(d_base: int) -> int:
    """Common projection width for the cross-modal block: max(32, d_base/2)."""
    return max(32, d_base // 2)
