"""Studies built on the library: patch tests, benchmarks, error sweeps, calibration."""
