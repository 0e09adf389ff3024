"""lsysinfer CLI - cone tests, confidence intervals and Monte Carlo studies."""
