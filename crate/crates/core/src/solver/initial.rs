use std::f64::consts::PI;

use serde::Serialize;

use super::{Grid, SolverError, State};
use crate::gamma::{fmt_f64, fmt_list};

/// One initial field, sampled at the cell centres.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Flat {
        value: f64,
    },
    /// `offset + amplitude cos(mode pi x / L)`
    CosineBump {
        offset: f64,
        amplitude: f64,
        mode: u32,
    },
    /// `offset + amplitude w(x) cos(wavenumber pi (x - center) / width)` with the
    /// compactly supported envelope `w = ((1 + cos(pi (x - center) / width)) / 2)^2`
    /// on `|x - center| < width`. The envelope is C2 and flat at the edges of its support.
    Packet {
        offset: f64,
        amplitude: f64,
        center: f64,
        width: f64,
        wavenumber: f64,
    },
    Tabulated {
        values: Vec<f64>,
    },
}

impl Profile {
    pub fn kind(&self) -> &'static str {
        match self {
            Profile::Flat { .. } => "flat",
            Profile::CosineBump { .. } => "cosine_bump",
            Profile::Packet { .. } => "packet",
            Profile::Tabulated { .. } => "tabulated",
        }
    }

    pub fn validate(&self, grid: &Grid, field: &str) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::InvalidConfig(format!("initial.{field}: {msg}")));
        match self {
            Profile::Flat { value } if !value.is_finite() => bad("value must be finite".into()),
            Profile::CosineBump { offset, amplitude, .. } if !(offset.is_finite() && amplitude.is_finite()) => {
                bad("offset and amplitude must be finite".into())
            }
            Profile::Packet {
                offset,
                amplitude,
                center,
                width,
                wavenumber,
            } => {
                if ![offset, amplitude, center, width, wavenumber].iter().all(|v| v.is_finite()) {
                    return bad("parameters must be finite".into());
                }
                if !(*width > 0.0) {
                    return bad(format!("width > 0 required (got {width})"));
                }
                // support must stay inside the domain so the profile is flat at both walls
                if center - width < 0.0 || center + width > grid.length() {
                    return bad(format!(
                        "support [{}, {}] must lie inside [0, {}]",
                        center - width,
                        center + width,
                        grid.length()
                    ));
                }
                Ok(())
            }
            Profile::Tabulated { values } => {
                if values.len() != grid.n_cells() {
                    return bad(format!("{} values for {} cells", values.len(), grid.n_cells()));
                }
                if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                    return bad(format!("non-finite value at index {i}"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn at(&self, x: f64, length: f64) -> f64 {
        match *self {
            Profile::Flat { value } => value,
            Profile::CosineBump { offset, amplitude, mode } => offset + amplitude * (mode as f64 * PI * x / length).cos(),
            Profile::Packet {
                offset,
                amplitude,
                center,
                width,
                wavenumber,
            } => {
                let s = (x - center) / width;
                if s.abs() >= 1.0 {
                    return offset;
                }
                let env = 0.5 * (1.0 + (PI * s).cos());
                offset + amplitude * env * env * (wavenumber * PI * s).cos()
            }
            Profile::Tabulated { .. } => f64::NAN,
        }
    }

    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        match self {
            Profile::Tabulated { values } => values.clone(),
            _ => (0..grid.n_cells()).map(|i| self.at(grid.x(i), grid.length())).collect(),
        }
    }

    pub fn config_entries(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![("kind", format!("\"{}\"", self.kind()))];
        match self {
            Profile::Flat { value } => out.push(("value", fmt_f64(*value))),
            Profile::CosineBump { offset, amplitude, mode } => {
                out.push(("offset", fmt_f64(*offset)));
                out.push(("amplitude", fmt_f64(*amplitude)));
                out.push(("mode", mode.to_string()));
            }
            Profile::Packet {
                offset,
                amplitude,
                center,
                width,
                wavenumber,
            } => {
                out.push(("offset", fmt_f64(*offset)));
                out.push(("amplitude", fmt_f64(*amplitude)));
                out.push(("center", fmt_f64(*center)));
                out.push(("width", fmt_f64(*width)));
                out.push(("wavenumber", fmt_f64(*wavenumber)));
            }
            Profile::Tabulated { values } => out.push(("values", fmt_list(values))),
        }
        out
    }
}

/// `(u0, u0t, theta0)`; the solver starts from `v0 = u0t + a u0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialData {
    pub u0: Profile,
    pub ut0: Profile,
    pub theta0: Profile,
}

impl InitialData {
    pub fn flat(u0: f64, ut0: f64, theta0: f64) -> Self {
        Self {
            u0: Profile::Flat { value: u0 },
            ut0: Profile::Flat { value: ut0 },
            theta0: Profile::Flat { value: theta0 },
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<(), SolverError> {
        self.u0.validate(grid, "u0")?;
        self.ut0.validate(grid, "ut0")?;
        self.theta0.validate(grid, "theta0")?;
        let theta = self.theta0.sample(grid);
        if let Some(i) = theta.iter().position(|&t| t < 0.0) {
            return Err(SolverError::InvalidConfig(format!(
                "initial.theta0 must be >= 0 (got {} at cell {i})",
                theta[i]
            )));
        }
        Ok(())
    }

    pub fn build(&self, grid: &Grid, a: f64) -> Result<State, SolverError> {
        self.validate(grid)?;
        let u = self.u0.sample(grid);
        let ut = self.ut0.sample(grid);
        let v = ut.iter().zip(&u).map(|(ut, u)| ut + a * u).collect();
        let state = State {
            t: 0.0,
            u,
            v,
            theta: self.theta0.sample(grid),
        };
        state.check(grid)?;
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn velocity_variable_is_recovered() {
        let g = Grid::new(1.0, 16).unwrap();
        let data = InitialData {
            u0: Profile::CosineBump {
                offset: 0.5,
                amplitude: 2.0,
                mode: 1,
            },
            ut0: Profile::Flat { value: 0.25 },
            theta0: Profile::Flat { value: 0.1 },
        };
        let s = data.build(&g, 1.5).unwrap();
        for (ut, i) in s.velocity(1.5).iter().zip(0..) {
            assert!((ut - 0.25).abs() < 1e-14, "cell {i}");
        }
    }

    #[test]
    fn packet_is_flat_outside_support() {
        let p = Profile::Packet {
            offset: 0.1,
            amplitude: 2.0,
            center: 0.5,
            width: 0.25,
            wavenumber: 0.0,
        };
        assert_eq!(p.at(0.2, 1.0), 0.1);
        assert_eq!(p.at(0.5, 1.0), 2.1);
        let g = Grid::new(1.0, 16).unwrap();
        assert!(p.validate(&g, "u0").is_ok());
        let off = Profile::Packet {
            offset: 0.0,
            amplitude: 1.0,
            center: 0.1,
            width: 0.25,
            wavenumber: 0.0,
        };
        assert!(off.validate(&g, "u0").is_err());
    }

    #[test]
    fn negative_temperature_rejected() {
        let g = Grid::new(1.0, 8).unwrap();
        let data = InitialData {
            theta0: Profile::CosineBump {
                offset: 0.05,
                amplitude: 0.1,
                mode: 1,
            },
            ..InitialData::flat(0.0, 0.0, 0.0)
        };
        assert!(data.build(&g, 1.0).is_err());
    }

    #[test]
    fn tabulated_length_checked() {
        let g = Grid::new(1.0, 8).unwrap();
        let p = Profile::Tabulated { values: vec![1.0; 7] };
        assert!(p.validate(&g, "u0").is_err());
    }
}
