//! Deterministic file output: JSON with 17-significant-digit floats and CSV
//! polygon dumps.

use anyhow::{Context, Result};
use nalgebra::DMatrix;
use polyreach::PolyZonotope;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// JSON formatter printing every float with 17 significant digits so that
/// outputs are byte-identical across runs and round-trip exactly.
pub struct SigDigitFormatter;

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W: std::io::Write + ?Sized>(
        &mut self,
        writer: &mut W,
        value: f64,
    ) -> std::io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: std::io::Write + ?Sized>(
        &mut self,
        writer: &mut W,
        value: f32,
    ) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut writer = BufWriter::new(file);
    let mut ser = serde_json::Serializer::with_formatter(&mut writer, SigDigitFormatter);
    value
        .serialize(&mut ser)
        .with_context(|| format!("writing {}", path.display()))?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Projector onto the first two coordinates (second row zero for 1-D sets).
pub fn projector_2d(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2, n);
    m[(0, 0)] = 1.0;
    if n > 1 {
        m[(1, 1)] = 1.0;
    }
    m
}

/// Writes the polygon vertices of the 2-D projections' zonotope enclosures,
/// one block per stored set, columns `t,k,x,y`.
pub fn write_polygons_csv(
    path: &Path,
    sets: &[(f64, usize, PolyZonotope)],
) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(
        w,
        "# zonotope-enclosure polygons of the 2-D projection; over-approximation of each stored set"
    )?;
    writeln!(w, "t,k,x,y")?;
    for (t, k, set) in sets {
        let proj = projector_2d(set.dim());
        let zono = set
            .linear_map(&proj)
            .expect("projector matches dimension")
            .enclose_zonotope();
        for (x, y) in zono.polygon_2d().expect("2-D zonotope") {
            writeln!(w, "{t:.16e},{k},{x:.16e},{y:.16e}")?;
        }
    }
    Ok(())
}

/// Writes sampled points of the exact sets, columns `t,k,x,y`.
pub fn write_samples_csv(
    path: &Path,
    sets: &[(f64, usize, PolyZonotope)],
    samples: usize,
    seed: u64,
) -> Result<()> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# sampled points of the exact stored sets")?;
    writeln!(w, "t,k,x,y")?;
    for (t, k, set) in sets {
        let proj = projector_2d(set.dim());
        for _ in 0..samples {
            let p = set.sample(&mut rng);
            let q = &proj * p;
            writeln!(w, "{t:.16e},{k},{:.16e},{:.16e}", q[0], q[1])?;
        }
    }
    Ok(())
}

/// Writes a trajectory as `t,x1,...,xn`.
pub fn write_trajectory_csv(path: &Path, traj: &polyreach::dynamics::Trajectory) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    let n = traj.states.first().map_or(0, |s| s.len());
    let header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    writeln!(w, "t,{}", header.join(","))?;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let cols: Vec<String> = x.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{t:.16e},{}", cols.join(","))?;
    }
    Ok(())
}
