"""Built-in bridge presets: a long suspension span and a short highway span."""
from __future__ import annotations

from dataclasses import replace

from .geo import BridgeFrame
from .pipeline import AnalysisConfig
from .simulator import SimConfig, modal_model

# long span: main span between the towers
GGB_L = 1280.0
GGB_A = (37.81587, -122.47820)
GGB_B = (37.82741, -122.47880)
GGB_FREQS = (0.106, 0.132, 0.170, 0.216, 0.230, 0.301, 0.339, 0.371, 0.445, 0.461)
GGB_TAGS = ("V-A", "V-S", "V-S", "V-A", "T-A", "V-S", "T-S", "V-A", "T-A", "V-S")
GGB_WEIGHTS = (1.0, 1.15, 0.6, 0.5, 0.3, 0.4, 0.3, 0.3, 0.25, 0.25)
GGB_SPEEDS_KPH = (32.0, 40.0, 48.0, 56.0, 64.0)

# short span
SHORT_L = 28.0
SHORT_A = (41.799, 12.594)
SHORT_B = (41.7991259, 12.5942925)
SHORT_FREQS = (2.58, 10.32)
SHORT_TAGS = ("V-S", "V-A")
SHORT_WEIGHTS = (1.0, 0.3)

ACCEL_UNIT = 0.01  # m/s^2 per unit weight


def ggb_frame():
    return BridgeFrame(GGB_A, GGB_B, GGB_L, margin=0.1, name="ggb")


def ggb_modal(zeta=0.01, weights=GGB_WEIGHTS):
    return modal_model(GGB_FREQS, GGB_TAGS, GGB_L, zeta=zeta,
                       amplitudes=[w * ACCEL_UNIT for w in weights], delta=10.0)


def ggb_sim(seed=0, snr_db=12.0, **kw):
    cfg = SimConfig(modal=ggb_modal(), frame=ggb_frame(), speeds_kph=GGB_SPEEDS_KPH,
                    approach=64.0, snr_db=snr_db, snr_band=0.5, seed=seed, name="ggb")
    return replace(cfg, **kw) if kw else cfg


def ggb_analysis(**kw):
    return AnalysisConfig(f_cut=0.5, alpha=0.05, N_R=5, delta_s=GGB_L / 129, c=GGB_L / 5,
                          bandwidth_pct=1.0, cdf_threshold=0.1, **kw)


def short_frame():
    return BridgeFrame(SHORT_A, SHORT_B, SHORT_L, margin=1.1, name="short")


def short_modal(zeta=0.02, weights=SHORT_WEIGHTS):
    return modal_model(SHORT_FREQS, SHORT_TAGS, SHORT_L, zeta=zeta,
                       amplitudes=[w * ACCEL_UNIT for w in weights], delta=1.0)


def short_sim(seed=0, snr_db=12.0, **kw):
    cfg = SimConfig(modal=short_modal(), frame=short_frame(), speeds_kph=(9.0, 72.0),
                    speed_range=True, approach=30.0, snr_db=snr_db, snr_band=12.5,
                    seed=seed, name="short")
    return replace(cfg, **kw) if kw else cfg


def short_analysis(**kw):
    return AnalysisConfig(f_cut=12.5, alpha=0.05, N_R=5, delta_s=2.0, c=7.0,
                          bandwidth_pct=1.0, cdf_threshold=0.1, **kw)


PRESETS = {
    "ggb": (ggb_frame, ggb_sim, ggb_analysis),
    "short": (short_frame, short_sim, short_analysis),
}
