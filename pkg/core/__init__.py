"""
IASim - Core Engines
Numerical building blocks: beamspace, channel, waveform, detector,
quantization, calibration and delay analysis.
"""
