//! Monte Carlo validation for `dpirs`. The suites live under `tests/`:
//! `acceptance` prints one PASS/FAIL line per criterion, `trends` holds
//! slower end-to-end comparisons between algorithm variants.
