//! `--state` / `--truth` specifications.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64;
use sqst_core::qstate::{make_pure_superposition, random_density, read_matrix_file, DensityMatrix};

/// A state preset, resolved against a dimension and seed by [`StateSpec::build`].
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    /// `superposition:i,j,a,b`: `a|i> + b|j>`, normalised. `a`, `b` accept `1`, `-0.5i`, `0.3+0.4i`.
    Superposition {
        i: usize,
        j: usize,
        a: Complex64,
        b: Complex64,
    },
    MaximallyMixed,
    /// `basis:i`
    Basis(usize),
    /// `random:rank`: Hilbert-Schmidt-induced random state drawn from the run seed.
    Random(usize),
    /// `file:path`: JSON matrix file.
    File(PathBuf),
}

impl FromStr for StateSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let index = |v: &str| {
            v.trim()
                .parse::<usize>()
                .with_context(|| format!("bad index '{v}' in state '{s}'"))
        };
        let amplitude = |v: &str| {
            Complex64::from_str(v.trim()).map_err(|_| anyhow!("bad amplitude '{v}' in state '{s}'"))
        };
        match kind {
            "superposition" => {
                let parts: Vec<&str> = rest.split(',').collect();
                if parts.len() != 4 {
                    bail!("expected superposition:i,j,a,b, got '{s}'");
                }
                Ok(StateSpec::Superposition {
                    i: index(parts[0])?,
                    j: index(parts[1])?,
                    a: amplitude(parts[2])?,
                    b: amplitude(parts[3])?,
                })
            }
            "maximally-mixed" if rest.is_empty() => Ok(StateSpec::MaximallyMixed),
            "basis" => Ok(StateSpec::Basis(index(rest)?)),
            "random" => Ok(StateSpec::Random(index(rest)?)),
            "file" if !rest.is_empty() => Ok(StateSpec::File(PathBuf::from(rest))),
            _ => bail!(
                "unknown state '{s}' (expected superposition:i,j,a,b | maximally-mixed | basis:i | random:rank | file:path)"
            ),
        }
    }
}

impl StateSpec {
    pub fn build(&self, d: usize, seed: u64) -> Result<DensityMatrix> {
        let rho = match self {
            StateSpec::Superposition { i, j, a, b } => make_pure_superposition(*i, *j, *a, *b, d)?,
            StateSpec::MaximallyMixed => DensityMatrix::maximally_mixed(d),
            StateSpec::Basis(i) => DensityMatrix::basis_state(d, *i)?,
            StateSpec::Random(rank) => random_density(d, *rank, seed)?,
            StateSpec::File(path) => {
                let m = read_matrix_file(path)?;
                if m.nrows() != d {
                    bail!(
                        "state file {} has dimension {}, expected {d}",
                        path.display(),
                        m.nrows()
                    );
                }
                DensityMatrix::new(m)?
            }
        };
        Ok(rho)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_presets() {
        assert_eq!(
            "superposition:0,1,1,1".parse::<StateSpec>().unwrap(),
            StateSpec::Superposition {
                i: 0,
                j: 1,
                a: Complex64::ONE,
                b: Complex64::ONE
            }
        );
        assert_eq!(
            "superposition:2,5,0.6,0.8i".parse::<StateSpec>().unwrap(),
            StateSpec::Superposition {
                i: 2,
                j: 5,
                a: Complex64::new(0.6, 0.0),
                b: Complex64::new(0.0, 0.8)
            }
        );
        assert_eq!(
            "maximally-mixed".parse::<StateSpec>().unwrap(),
            StateSpec::MaximallyMixed
        );
        assert_eq!("basis:3".parse::<StateSpec>().unwrap(), StateSpec::Basis(3));
        assert_eq!(
            "random:2".parse::<StateSpec>().unwrap(),
            StateSpec::Random(2)
        );
        assert_eq!(
            "file:a.json".parse::<StateSpec>().unwrap(),
            StateSpec::File("a.json".into())
        );
        for bad in [
            "superposition:0,1,1",
            "basis:x",
            "pure",
            "file:",
            "superposition:0,1,q,1",
        ] {
            assert!(bad.parse::<StateSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn builds_states() {
        let rho = "superposition:0,1,1,1"
            .parse::<StateSpec>()
            .unwrap()
            .build(2, 0)
            .unwrap();
        assert!((rho.element(0, 1) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!("basis:4".parse::<StateSpec>().unwrap().build(4, 0).is_err());
        let a = StateSpec::Random(2).build(3, 9).unwrap();
        assert_eq!(a, StateSpec::Random(2).build(3, 9).unwrap());
    }
}
