# Regenerates loudness_reference.json with MoSQITo's ISO 532-1 time-varying
# loudness (pip install mosqito). The C++ test rebuilds the same signal.
import json

import numpy as np
from mosqito.sq_metrics import loudness_zwtv

FS = 48000
P_FS = np.sqrt(2) * 2e-5 * 10 ** (94 / 20)  # pascal for a full-scale sine at 94 dB SPL


def ramp_chord():
    n = np.arange(FS)
    t = n / FS
    x = sum(np.sin(2 * np.pi * f * t) for f in (220, 440, 880, 1760, 3520)) * 0.02
    return (x * (0.2 + 0.8 * n / (FS - 1))).astype(np.float32)


def tone(db, seconds=2.0):
    t = np.arange(int(FS * seconds)) / FS
    return np.sqrt(2) * 2e-5 * 10 ** (db / 20) * np.sin(2 * np.pi * 1000 * t)


out = {"tones": {}}
for db in (40, 50, 60, 70):
    n, _, _, _ = loudness_zwtv(tone(db), FS, field_type="free")
    out["tones"][str(db)] = float(n[-100:].mean())

n, specific, _, _ = loudness_zwtv(ramp_chord().astype(np.float64) * P_FS, FS, field_type="free")
frames = [50, 120, 200, 300, 400, 499]
out["ramp_chord"] = {
    "total": [float(v) for v in n],
    "frames": frames,
    "specific": [[round(float(v), 6) for v in specific[:, f]] for f in frames],
}
with open("loudness_reference.json", "w") as f:
    json.dump(out, f)
