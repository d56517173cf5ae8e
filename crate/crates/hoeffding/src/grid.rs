//! `(x, v, n)` grids for comparison sweeps and property suites.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub x: f64,
    pub v: f64,
    pub n: u64,
}

pub const DEFAULT_N: [u64; 7] = [1, 2, 5, 10, 100, 10_000, 1_000_000];
pub const DEFAULT_V: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

/// Absolute thresholds followed by fractions of `n`.
fn default_x(n: u64) -> [f64; 10] {
    let n = n as f64;
    [0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 0.3 * n, 0.7 * n, n]
}

/// The 350-point default sweep: boundary, moderate-deviation and limit regimes.
pub fn default_grid() -> Vec<GridPoint> {
    let mut points = Vec::with_capacity(350);
    for n in DEFAULT_N {
        for v in DEFAULT_V {
            for x in default_x(n) {
                points.push(GridPoint { x, v, n });
            }
        }
    }
    points
}

/// A 10^4-point grid with `x in [0, n]`: 10 horizons, 25 budgets, 40 thresholds.
pub fn dense_grid() -> Vec<GridPoint> {
    const N: [u64; 10] = [1, 2, 3, 5, 10, 30, 100, 1000, 10_000, 1_000_000];
    const ABSOLUTE_X: [f64; 20] = [
        0.0, 1e-3, 0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0, 7.5, 10.0, 20.0,
        50.0, 100.0, 500.0,
    ];
    let mut points = Vec::with_capacity(10_000);
    for n in N {
        let nf = n as f64;
        for i in 0..25 {
            // Log-spaced from 0.05 to 20.
            let v = 0.05 * (400f64).powf(i as f64 / 24.0);
            for x in ABSOLUTE_X {
                points.push(GridPoint { x: x.min(nf), v, n });
            }
            for j in 1..=20 {
                points.push(GridPoint {
                    x: nf * j as f64 / 20.0,
                    v,
                    n,
                });
            }
        }
    }
    points
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridError {
    pub line: u64,
    pub message: String,
}

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "grid line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for GridError {}

/// Parses `x,v,n` records; `#` starts a comment and an `x,v,n` header is optional.
pub fn parse_grid(text: &str) -> Result<Vec<GridPoint>, GridError> {
    // Comments are cut per line first so that trailing comments are allowed; line numbers are kept.
    let cleaned: Vec<&str> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .collect();
    let cleaned = cleaned.join("\n");
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(cleaned.as_bytes());
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| GridError {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.get(0) == Some("x") {
            continue;
        }
        if record.len() != 3 {
            return Err(GridError {
                line,
                message: format!("expected 3 fields x,v,n, found {}", record.len()),
            });
        }
        let real = |i: usize, name: &str| {
            record[i].parse::<f64>().map_err(|_| GridError {
                line,
                message: format!("{name} = {:?} is not a number", &record[i]),
            })
        };
        let x = real(0, "x")?;
        let v = real(1, "v")?;
        let n = record[2].parse::<u64>().map_err(|_| GridError {
            line,
            message: format!("n = {:?} is not a positive integer", &record[2]),
        })?;
        points.push(GridPoint { x, v, n });
    }
    if points.is_empty() {
        return Err(GridError {
            line: 0,
            message: "grid has no points".into(),
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        assert_eq!(default_grid().len(), 350);
        let dense = dense_grid();
        assert_eq!(dense.len(), 10_000);
        assert!(dense
            .iter()
            .all(|p| p.x >= 0.0 && p.x <= p.n as f64 && p.v > 0.0));
        assert!(dense.iter().any(|p| p.x == p.n as f64));
    }

    #[test]
    fn parses_grid_files() {
        let g = parse_grid("# sweep\nx,v,n\n1, 1, 2\n\n0.5,2,10 # tail\n").unwrap();
        assert_eq!(
            g,
            vec![
                GridPoint {
                    x: 1.0,
                    v: 1.0,
                    n: 2
                },
                GridPoint {
                    x: 0.5,
                    v: 2.0,
                    n: 10
                }
            ]
        );
        assert!(parse_grid("1,1\n").is_err());
        assert!(parse_grid("1,a,2\n").is_err());
        assert!(parse_grid("1,1,-2\n").is_err());
        assert!(parse_grid("# empty\n").is_err());
    }
}
