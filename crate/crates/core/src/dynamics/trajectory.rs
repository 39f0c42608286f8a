use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::spectral::Field;

use super::{DynamicsError, EvolveParams, PerturbationSpec};

pub const TRAJECTORY_SCHEMA_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const SAMPLES: &str = "samples.bin";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub config_digest: Option<String>,
}

/// Sampled solution `(τ_i, u(τ_i))` with strictly increasing `τ_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    samples: Vec<(f64, Field)>,
    pub params: EvolveParams,
    pub spec: PerturbationSpec,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    clock: String,
    m_max: usize,
    n_samples: usize,
    params: EvolveParams,
    perturbation: PerturbationSpec,
    provenance: Provenance,
}

impl Trajectory {
    pub fn new(params: EvolveParams, spec: PerturbationSpec) -> Self {
        Self {
            samples: Vec::new(),
            params,
            spec,
            provenance: Provenance::default(),
        }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Appends a sample; panics on a non-increasing time or a resolution change.
    pub fn push(&mut self, tau: f64, u: Field) {
        if let Some((t, f)) = self.samples.last() {
            assert!(tau > *t, "trajectory times must increase ({tau} after {t})");
            assert_eq!(f.m_max(), u.m_max(), "trajectory resolution changed");
        }
        self.samples.push((tau, u));
    }

    pub fn samples(&self) -> &[(f64, Field)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn taus(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.0)
    }

    pub fn fields(&self) -> impl Iterator<Item = &Field> + '_ {
        self.samples.iter().map(|s| &s.1)
    }

    pub fn first(&self) -> (f64, &Field) {
        let (t, f) = &self.samples[0];
        (*t, f)
    }

    pub fn last(&self) -> (f64, &Field) {
        let (t, f) = self.samples.last().expect("empty trajectory");
        (*t, f)
    }

    pub fn m_max(&self) -> usize {
        self.samples.first().map_or(0, |s| s.1.m_max())
    }

    /// Linear interpolation in coefficient space at clock value `tau`.
    pub fn interpolate(&self, tau: f64) -> Option<Field> {
        let i = self.samples.partition_point(|s| s.0 < tau);
        if i < self.samples.len() && self.samples[i].0 == tau {
            return Some(self.samples[i].1.clone());
        }
        if i == 0 || i == self.samples.len() {
            return None;
        }
        let (t0, f0) = &self.samples[i - 1];
        let (t1, f1) = &self.samples[i];
        let w = (tau - t0) / (t1 - t0);
        let mut out = f0.scale(1.0 - w);
        out.axpy(w, f1);
        Some(out)
    }

    pub fn save(&self, dir: &Path) -> Result<(), DynamicsError> {
        std::fs::create_dir_all(dir)?;
        let manifest = Manifest {
            schema_version: TRAJECTORY_SCHEMA_VERSION,
            clock: if self.params.is_slow_clock() { "slow" } else { "fast" }.into(),
            m_max: self.m_max(),
            n_samples: self.len(),
            params: self.params.clone(),
            perturbation: self.spec.clone(),
            provenance: self.provenance.clone(),
        };
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| DynamicsError::Format(e.to_string()))?;
        std::fs::write(dir.join(MANIFEST), json + "\n")?;
        let mut w = BufWriter::new(File::create(dir.join(SAMPLES))?);
        for (tau, f) in &self.samples {
            w.write_all(&tau.to_le_bytes())?;
            f.write_frame(&mut w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, DynamicsError> {
        let text = std::fs::read_to_string(dir.join(MANIFEST))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| DynamicsError::Format(e.to_string()))?;
        if manifest.schema_version != TRAJECTORY_SCHEMA_VERSION {
            return Err(DynamicsError::Format(format!(
                "schema_version {} is not supported",
                manifest.schema_version
            )));
        }
        let mut r = BufReader::new(File::open(dir.join(SAMPLES))?);
        let mut traj = Trajectory::new(manifest.params, manifest.perturbation)
            .with_provenance(manifest.provenance);
        for _ in 0..manifest.n_samples {
            let mut word = [0u8; 8];
            r.read_exact(&mut word)?;
            let tau = f64::from_le_bytes(word);
            let f = Field::read_frame(&mut r).map_err(|e| DynamicsError::Format(e.to_string()))?;
            if f.m_max() != manifest.m_max {
                return Err(DynamicsError::Format("sample resolution differs from manifest".into()));
            }
            if traj.samples.last().is_some_and(|s| s.0 >= tau) {
                return Err(DynamicsError::Format("sample times not increasing".into()));
            }
            traj.samples.push((tau, f));
        }
        Ok(traj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve, EvolveParams};

    #[test]
    fn save_load_roundtrip() {
        let u0 = Field::from_pairs(vec![[0.01, 0.02], [0.003, -0.001]]).unwrap();
        let tr = evolve(
            &u0,
            &EvolveParams::slow(0.1, 0.003),
            &PerturbationSpec::double_antiderivative(),
            0.001,
        )
        .unwrap()
        .with_provenance(Provenance {
            seed: Some(7),
            config_digest: Some("abc".into()),
        });
        let dir = tempfile::tempdir().unwrap();
        tr.save(dir.path()).unwrap();
        let back = Trajectory::load(dir.path()).unwrap();
        assert_eq!(back, tr);
    }

    #[test]
    fn interpolation_hits_samples_and_midpoints() {
        let mut tr = Trajectory::new(EvolveParams::fast(0.0, 1.0), PerturbationSpec::none());
        tr.push(0.0, Field::basis(1, 1));
        tr.push(1.0, Field::basis(1, 1).scale(3.0));
        assert_eq!(tr.interpolate(1.0).unwrap().coeff(1), 3.0);
        assert_eq!(tr.interpolate(0.5).unwrap().coeff(1), 2.0);
        assert!(tr.interpolate(1.5).is_none());
    }

    #[test]
    #[should_panic]
    fn rejects_nonincreasing_time() {
        let mut tr = Trajectory::new(EvolveParams::fast(0.0, 1.0), PerturbationSpec::none());
        tr.push(0.5, Field::zeros(1));
        tr.push(0.5, Field::zeros(1));
    }
}
