"""Offline simulation toolkit for multichannel FxLMS active noise control
on a boundary-control virtual sound barrier."""

__version__ = "0.1.0"
