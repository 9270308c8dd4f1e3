//! Reproducible evaluation scenarios.
//!
//! A [`BenchScenario`] fixes shapes, layout parameters, isosurfacers, sweeps
//! and seeds. [`run_bench`] produces six tables, each written as CSV, plus a
//! JSON report embedding the scenario and the tool version. Trials run in
//! parallel but every row depends only on the scenario, so reruns are
//! byte-identical.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::AttackSpec;
use crate::embed::{bake_watermarked, NewtonConfig, WatermarkedField};
use crate::field::{Bbox, GridField, PerturbedField, Primitive};
use crate::partition::PartitionLayout;
use crate::surface::{extract, sample_surface, Isosurfacer, DEFAULT_SAMPLE_TOLERANCE};
use crate::verify::{decode, detect, Verdict};
use crate::{message, Error, Result, VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchScenario {
    /// Primitive specs, e.g. `sphere` or `torus:0.5:0.2`.
    pub shapes: Vec<String>,
    pub n_s: usize,
    pub delta: f64,
    pub message_bits: usize,
    pub bake_dims: usize,
    /// `mc` and/or `dc`.
    pub isosurfacers: Vec<String>,
    pub resolutions: Vec<usize>,
    /// Message lengths swept in the resolution table.
    pub message_lengths: Vec<usize>,
    /// δ values swept in the accuracy-vs-strength table.
    pub deltas: Vec<f64>,
    /// Attack specs in the `name:arg1[:arg2]` grammar.
    pub attacks: Vec<String>,
    /// Resolution of the mesh the attacks are applied to.
    pub attack_resolution: usize,
    pub detection_points: Vec<usize>,
    pub detection_deltas: Vec<f64>,
    pub alpha: f64,
    pub trials: usize,
    pub z_points: Vec<usize>,
    /// Peak amplitude and wavelength of the null-field perturbation.
    pub null_amplitude: f64,
    pub null_wavelength: f64,
    pub seed: u64,
}

impl Default for BenchScenario {
    fn default() -> Self {
        Self {
            shapes: vec!["sphere".into(), "torus".into(), "blob".into()],
            n_s: 32,
            delta: 0.001,
            message_bits: 16,
            bake_dims: 128,
            isosurfacers: vec!["mc".into(), "dc".into()],
            resolutions: vec![64, 128, 256],
            message_lengths: vec![8, 16, 32],
            deltas: vec![0.0005, 0.001, 0.002, 0.004],
            attacks: [
                "gaussian:0.001",
                "gaussian:0.005",
                "gaussian:0.01",
                "rotate:90:0,0,1",
                "scale:1.2",
                "translate:0.05,0,0",
                "quantize:16",
                "quantize:8",
                "smooth:1",
                "smooth:3",
                "simplify:0.3",
                "simplify:0.6",
                "remesh",
            ]
            .map(String::from)
            .to_vec(),
            attack_resolution: 256,
            detection_points: vec![10, 50, 100, 500],
            detection_deltas: vec![0.0005, 0.001],
            alpha: 0.001,
            trials: 100,
            z_points: vec![10, 50, 100, 1000, 5000],
            null_amplitude: 0.001,
            null_wavelength: 0.05,
            seed: 0,
        }
    }
}

impl BenchScenario {
    /// A small scenario that finishes in seconds; for smoke tests.
    pub fn quick() -> Self {
        Self {
            shapes: vec!["sphere".into()],
            bake_dims: 64,
            resolutions: vec![32, 64],
            message_lengths: vec![16],
            deltas: vec![0.002, 0.004, 0.008],
            attacks: vec!["gaussian:0.001".into(), "quantize:8".into(), "smooth:1".into()],
            attack_resolution: 64,
            detection_points: vec![20, 100],
            detection_deltas: vec![0.004],
            delta: 0.004,
            trials: 10,
            z_points: vec![10, 100, 1000],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.shapes.is_empty() {
            return bad("scenario needs at least one shape".into());
        }
        for s in &self.shapes {
            s.parse::<Primitive>()?;
        }
        for s in &self.isosurfacers {
            s.parse::<Isosurfacer>()?;
        }
        for a in &self.attacks {
            a.parse::<AttackSpec>()?;
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.bake_dims < 4 {
            return bad(format!("bake_dims {} too small", self.bake_dims));
        }
        if self.resolutions.iter().chain([&self.attack_resolution]).any(|&r| r < 2) {
            return bad("resolutions must be at least 2".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} outside (0, 1)", self.alpha));
        }
        if self.message_lengths.iter().chain([&self.message_bits]).any(|&m| m == 0) {
            return bad("message lengths must be positive".into());
        }
        PerturbedField::new(Primitive::preset("sphere").unwrap(), self.null_amplitude, self.null_wavelength, 1, 0)?;
        for &d in self.deltas.iter().chain(&self.detection_deltas).chain([&self.delta]) {
            PartitionLayout::new(self.n_s, vec![false; self.message_bits], d)?;
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sc: Self = serde_json::from_str(s)?;
        sc.validate()?;
        Ok(sc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionRow {
    pub shape: String,
    pub message_bits: usize,
    pub resolution: usize,
    pub bit_accuracy: f64,
    pub decodable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub shape: String,
    pub delta: f64,
    pub n_points: usize,
    pub trials: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub precision: Option<f64>,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrengthRow {
    pub shape: String,
    pub delta: f64,
    pub resolution: usize,
    pub bit_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsosurfacerRow {
    pub shape: String,
    pub isosurfacer: String,
    pub resolution: usize,
    pub bit_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRow {
    pub shape: String,
    pub attack: String,
    pub vertices: usize,
    pub bit_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZCurveRow {
    pub shape: String,
    pub n_points: usize,
    pub trials: usize,
    pub mean_z: f64,
    pub std_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub version: String,
    pub scenario: BenchScenario,
    pub accuracy_vs_resolution: Vec<ResolutionRow>,
    pub detection: Vec<DetectionRow>,
    pub accuracy_vs_delta: Vec<StrengthRow>,
    pub accuracy_vs_isosurfacer: Vec<IsosurfacerRow>,
    pub accuracy_vs_attack: Vec<AttackRow>,
    pub z_curve: Vec<ZCurveRow>,
}

/// Deterministic per-task seed.
fn sub_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Bakes<'a> {
    sc: &'a BenchScenario,
    cache: BTreeMap<(usize, usize, u64), (PartitionLayout, GridField)>,
}

impl<'a> Bakes<'a> {
    fn message(&self, bits: usize) -> Vec<bool> {
        message::random(bits, sub_seed(self.sc.seed, 1, bits as u64))
    }

    /// Baked watermarked grid of shape `shape` for a message length and δ.
    fn get(&mut self, shape: usize, bits: usize, delta: f64) -> Result<&(PartitionLayout, GridField)> {
        let key = (shape, bits, delta.to_bits());
        if !self.cache.contains_key(&key) {
            let base: Primitive = self.sc.shapes[shape].parse()?;
            let layout = PartitionLayout::new(self.sc.n_s, self.message(bits), delta)?;
            let newton = NewtonConfig {
                seed: self.sc.seed,
                ..NewtonConfig::default()
            };
            let wf = WatermarkedField::new(base, layout.clone(), newton)?;
            let d = self.sc.bake_dims;
            log::info!("baking {} ({bits} bits, delta {delta}) at {d}^3", self.sc.shapes[shape]);
            let (grid, report) = bake_watermarked(&wf, [d; 3], Bbox::standard())?;
            if report.failures > 0 {
                log::warn!("{} Newton failures while baking", report.failures);
            }
            self.cache.insert(key, (layout, grid));
        }
        Ok(&self.cache[&key])
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Runs every table of the scenario.
pub fn run_bench(sc: &BenchScenario) -> Result<BenchReport> {
    sc.validate()?;
    let shapes: Vec<Primitive> = sc.shapes.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    let isos: Vec<Isosurfacer> = sc.isosurfacers.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    let attacks: Vec<AttackSpec> = sc.attacks.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    let bbox = Bbox::standard();
    let mut bakes = Bakes {
        sc,
        cache: BTreeMap::new(),
    };
    let mut report = BenchReport {
        version: VERSION.to_string(),
        scenario: sc.clone(),
        accuracy_vs_resolution: Vec::new(),
        detection: Vec::new(),
        accuracy_vs_delta: Vec::new(),
        accuracy_vs_isosurfacer: Vec::new(),
        accuracy_vs_attack: Vec::new(),
        z_curve: Vec::new(),
    };

    for (si, base) in shapes.iter().enumerate() {
        let name = &sc.shapes[si];

        for &bits in &sc.message_lengths {
            let (layout, grid) = bakes.get(si, bits, sc.delta)?;
            for &res in &sc.resolutions {
                let mesh = extract(Isosurfacer::MarchingCubes, grid, res, &bbox)?;
                let d = decode(&mesh.vertices, base, layout)?;
                report.accuracy_vs_resolution.push(ResolutionRow {
                    shape: name.clone(),
                    message_bits: bits,
                    resolution: res,
                    bit_accuracy: d.bit_accuracy,
                    decodable: d.decodable,
                });
            }
        }

        let top_res = *sc.resolutions.iter().max().unwrap_or(&sc.attack_resolution);
        for &delta in &sc.deltas {
            let (layout, grid) = bakes.get(si, sc.message_bits, delta)?;
            let mesh = extract(Isosurfacer::MarchingCubes, grid, top_res, &bbox)?;
            report.accuracy_vs_delta.push(StrengthRow {
                shape: name.clone(),
                delta,
                resolution: top_res,
                bit_accuracy: decode(&mesh.vertices, base, layout)?.bit_accuracy,
            });
        }

        {
            let (layout, grid) = bakes.get(si, sc.message_bits, sc.delta)?;
            for &iso in &isos {
                for &res in &sc.resolutions {
                    let mesh = extract(iso, grid, res, &bbox)?;
                    report.accuracy_vs_isosurfacer.push(IsosurfacerRow {
                        shape: name.clone(),
                        isosurfacer: iso.to_string(),
                        resolution: res,
                        bit_accuracy: decode(&mesh.vertices, base, layout)?.bit_accuracy,
                    });
                }
            }

            let mesh = extract(Isosurfacer::MarchingCubes, grid, sc.attack_resolution, &bbox)?;
            let clean = decode(&mesh.vertices, base, layout)?.bit_accuracy;
            report.accuracy_vs_attack.push(AttackRow {
                shape: name.clone(),
                attack: "none".into(),
                vertices: mesh.vertices.len(),
                bit_accuracy: clean,
            });
            let rows: Vec<AttackRow> = attacks
                .par_iter()
                .enumerate()
                .map(|(ai, a)| {
                    let out = a.apply(&mesh, sub_seed(sc.seed, 2, ai as u64))?;
                    // Affine attacks are scored as-is; recovering them is the aligner's job.
                    let acc = decode(&out.vertices, base, layout).map_or(0.0, |d| d.bit_accuracy);
                    Ok(AttackRow {
                        shape: name.clone(),
                        attack: a.to_string(),
                        vertices: out.vertices.len(),
                        bit_accuracy: acc,
                    })
                })
                .collect::<Result<_>>()?;
            report.accuracy_vs_attack.extend(rows);

            let zs: Vec<ZCurveRow> = sc
                .z_points
                .iter()
                .map(|&n| {
                    let z: Vec<f64> = (0..sc.trials)
                        .into_par_iter()
                        .map(|t| {
                            let seed = sub_seed(sc.seed, 3, (n * sc.trials + t) as u64);
                            let pts = sample_surface(grid, n, seed, DEFAULT_SAMPLE_TOLERANCE)?.points;
                            Ok(detect(&pts, base, layout, sc.alpha)?.z_score)
                        })
                        .collect::<Result<_>>()?;
                    let (mean_z, std_z) = mean_std(&z);
                    Ok(ZCurveRow {
                        shape: name.clone(),
                        n_points: n,
                        trials: sc.trials,
                        mean_z,
                        std_z,
                    })
                })
                .collect::<Result<_>>()?;
            report.z_curve.extend(zs);
        }

        for &delta in &sc.detection_deltas {
            let (layout, grid) = bakes.get(si, sc.message_bits, delta)?;
            for &n in &sc.detection_points {
                let outcomes: Vec<(bool, bool)> = (0..sc.trials)
                    .into_par_iter()
                    .map(|t| {
                        let seed = sub_seed(sc.seed, 4, (n * sc.trials + t) as u64);
                        let pts = sample_surface(grid, n, seed, DEFAULT_SAMPLE_TOLERANCE)?.points;
                        let hit = detect(&pts, base, layout, sc.alpha)?.verdict == Verdict::Reject;
                        let null = PerturbedField::new(base.clone(), sc.null_amplitude, sc.null_wavelength, 8, seed)?;
                        let pts = sample_surface(&null, n, seed ^ 1, DEFAULT_SAMPLE_TOLERANCE)?.points;
                        let false_hit = detect(&pts, base, layout, sc.alpha)?.verdict == Verdict::Reject;
                        Ok((hit, false_hit))
                    })
                    .collect::<Result<_>>()?;
                let tp = outcomes.iter().filter(|o| o.0).count();
                let fp = outcomes.iter().filter(|o| o.1).count();
                report.detection.push(DetectionRow {
                    shape: name.clone(),
                    delta,
                    n_points: n,
                    trials: sc.trials,
                    true_positives: tp,
                    false_positives: fp,
                    precision: (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64),
                    recall: tp as f64 / sc.trials as f64,
                });
            }
        }
    }
    Ok(report)
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

impl BenchReport {
    /// Table name to CSV text, in a fixed order.
    pub fn csv_tables(&self) -> Result<Vec<(&'static str, String)>> {
        Ok(vec![
            ("accuracy_vs_resolution", to_csv(&self.accuracy_vs_resolution)?),
            ("detection", to_csv(&self.detection)?),
            ("accuracy_vs_delta", to_csv(&self.accuracy_vs_delta)?),
            ("accuracy_vs_isosurfacer", to_csv(&self.accuracy_vs_isosurfacer)?),
            ("accuracy_vs_attack", to_csv(&self.accuracy_vs_attack)?),
            ("z_curve", to_csv(&self.z_curve)?),
        ])
    }

    /// Writes `<table>.csv` for each table and `report.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (name, text) in self.csv_tables()? {
            std::fs::write(dir.join(format!("{name}.csv")), text)?;
        }
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_json_round_trip() {
        let sc = BenchScenario::default();
        let back = BenchScenario::from_json(&serde_json::to_string(&sc).unwrap()).unwrap();
        assert_eq!(sc, back);
    }

    #[test]
    fn partial_scenario_fills_defaults() {
        let sc = BenchScenario::from_json(r#"{"shapes": ["torus"], "trials": 5}"#).unwrap();
        assert_eq!(sc.shapes, vec!["torus"]);
        assert_eq!(sc.n_s, 32);
    }

    #[test]
    fn rejects_bad_scenarios() {
        assert!(BenchScenario::from_json(r#"{"shapes": ["cube"]}"#).is_err());
        assert!(BenchScenario::from_json(r#"{"attacks": ["melt:3"]}"#).is_err());
        assert!(BenchScenario::from_json(r#"{"trials": 0}"#).is_err());
        assert!(BenchScenario::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn sub_seeds_differ() {
        assert_ne!(sub_seed(0, 1, 0), sub_seed(0, 1, 1));
        assert_ne!(sub_seed(0, 1, 0), sub_seed(0, 2, 0));
        assert_eq!(sub_seed(5, 3, 9), sub_seed(5, 3, 9));
    }
}
