use std::path::{Path, PathBuf};

use anyhow::Context;
use gapgrad_core::solver::DiskField;
use serde::Serialize;

use crate::report::{ReportBundle, RunMetadata, Series};

/// `r,theta,value` rows, ring by ring, then the boundary data at `R0`.
pub fn write_field_csv(field: &DiskField, path: &Path) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["r", "theta", "value"])?;
    let g = &field.grid;
    for i in 0..g.n_r {
        for j in 0..g.n_theta {
            w.serialize((g.r(i), g.theta(j), field.at(i, j)))?;
        }
    }
    for j in 0..g.n_theta {
        w.serialize((g.radius(), g.theta(j), field.boundary[j]))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series_csv(series: &Series, path: &Path) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record([series.x_label.as_str(), series.y_label.as_str()])?;
    for p in &series.points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes `report.json`, `metadata.json`, one CSV per series and the plots.
pub fn write_bundle(
    bundle: &ReportBundle,
    meta: &RunMetadata,
    dir: &Path,
) -> anyhow::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = Vec::new();
    let report = dir.join("report.json");
    write_json(bundle, &report)?;
    files.push(report);
    let m = dir.join("metadata.json");
    write_json(meta, &m)?;
    files.push(m);
    for s in &bundle.series {
        let p = dir.join(format!("{}.csv", s.name));
        write_series_csv(s, &p)?;
        files.push(p);
    }
    files.extend(crate::plot::emit_plots(bundle, dir)?.files);
    Ok(files)
}
