//! Scattered station series to a regular (t, lat, lon) grid.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::delaunay::Triangulation;
use super::station::StationRecord;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nt: usize,
    /// Latitude nodes.
    pub n1: usize,
    /// Longitude nodes.
    pub n2: usize,
    /// `[[lat_min, lat_max], [lon_min, lon_max]]`; defaults to the station extent.
    #[serde(default)]
    pub bbox: Option<[[f64; 2]; 2]>,
    /// `[t_start, t_end]` in seconds; defaults to the union of station spans.
    #[serde(default)]
    pub time_window: Option<[f64; 2]>,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nt < 2 || self.n1 < 2 || self.n2 < 2 {
            return Err(Error::Config(format!(
                "grid sizes must be at least 2 per axis, got {}x{}x{}",
                self.nt, self.n1, self.n2
            )));
        }
        let ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] < r[1];
        if let Some(b) = self.bbox {
            if !ok(b[0]) || !ok(b[1]) {
                return Err(Error::Config(format!("bad bounding box {b:?}")));
            }
        }
        if let Some(w) = self.time_window {
            if !ok(w) {
                return Err(Error::Config(format!("bad time window {w:?}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GriddedData {
    /// Valid nodes only, columns `t, lat, lon, u`.
    pub dataset: Dataset,
    /// One flag per node in `(t, lat, lon)` row-major order.
    pub mask: Vec<bool>,
    pub times: Vec<f64>,
    pub lat: Vec<f64>,
    pub lon: Vec<f64>,
}

impl GriddedData {
    pub fn n_valid(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
        .collect()
}

/// Linear interpolation of a sorted series; `None` outside its span.
fn sample(obs: &[(f64, f64)], t: f64) -> Option<f64> {
    let (first, last) = (obs.first()?, obs.last()?);
    if t < first.0 || t > last.0 {
        return None;
    }
    let j = obs.partition_point(|o| o.0 <= t);
    if j == 0 {
        return Some(first.1);
    }
    let (t0, v0) = obs[j - 1];
    if t0 == t || j == obs.len() {
        return Some(v0);
    }
    let (t1, v1) = obs[j];
    let s = (t - t0) / (t1 - t0);
    Some(v0 + s * (v1 - v0))
}

/// Per-node station indices and weights for one active station set.
type Stencil = Vec<Option<([usize; 3], [f64; 3])>>;

fn stencil(records: &[StationRecord], active: &[usize], lat: &[f64], lon: &[f64]) -> Result<Stencil> {
    let pts: Vec<[f64; 2]> = active.iter().map(|&s| [records[s].latitude, records[s].longitude]).collect();
    let tri = Triangulation::new(&pts)?;
    Ok(lat
        .iter()
        .flat_map(|&a| lon.iter().map(move |&b| [a, b]))
        .map(|p| {
            tri.locate(p).map(|(k, w)| {
                let t = tri.triangles[k];
                ([active[t[0]], active[t[1]], active[t[2]]], w)
            })
        })
        .collect())
}

/// Interpolates each station linearly in time, then each time slice
/// barycentrically over the Delaunay triangulation of the stations active at
/// that time. Nodes outside the hull of the active stations are masked.
pub fn interpolate_to_grid(records: &[StationRecord], grid: &GridSpec) -> Result<GriddedData> {
    grid.validate()?;
    let usable: Vec<usize> = (0..records.len())
        .filter(|&s| {
            let r = &records[s];
            !r.observations.is_empty() && r.latitude.is_finite() && r.longitude.is_finite()
        })
        .collect();
    if usable.len() < 3 {
        return Err(Error::Triangulation(format!("need at least 3 stations with data, got {}", usable.len())));
    }
    // degenerate geometry is an error up front
    let all: Vec<[f64; 2]> = usable.iter().map(|&s| [records[s].latitude, records[s].longitude]).collect();
    Triangulation::new(&all)?;

    let bbox = grid.bbox.unwrap_or_else(|| {
        let (mut b, f) = ([[f64::INFINITY, f64::NEG_INFINITY]; 2], |x: &mut [f64; 2], v: f64| {
            x[0] = x[0].min(v);
            x[1] = x[1].max(v);
        });
        for p in &all {
            f(&mut b[0], p[0]);
            f(&mut b[1], p[1]);
        }
        b
    });
    let window = match grid.time_window {
        Some(w) => w,
        None => {
            let lo = usable.iter().map(|&s| records[s].observations[0].0).fold(f64::INFINITY, f64::min);
            let hi = usable
                .iter()
                .map(|&s| records[s].observations.last().unwrap().0)
                .fold(f64::NEG_INFINITY, f64::max);
            if !(lo < hi) {
                return Err(Error::Config("observations span no time interval".into()));
            }
            [lo, hi]
        }
    };
    let times = linspace(window[0], window[1], grid.nt);
    let lat = linspace(bbox[0][0], bbox[0][1], grid.n1);
    let lon = linspace(bbox[1][0], bbox[1][1], grid.n2);

    // station values per time stamp, then the distinct active sets
    let slices: Vec<Vec<Option<f64>>> = times
        .par_iter()
        .map(|&t| records.iter().map(|r| sample(&r.observations, t)).collect())
        .collect();
    let mut set_of_slice = Vec::with_capacity(times.len());
    let mut sets: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut set_list: Vec<Vec<usize>> = Vec::new();
    for vals in &slices {
        let active: Vec<usize> = usable.iter().copied().filter(|&s| vals[s].is_some()).collect();
        let id = *sets.entry(active.clone()).or_insert_with(|| {
            set_list.push(active);
            set_list.len() - 1
        });
        set_of_slice.push(id);
    }
    let stencils: Vec<Option<Stencil>> = set_list
        .par_iter()
        .map(|active| match stencil(records, active, &lat, &lon) {
            Ok(s) => Some(s),
            Err(e) => {
                log::warn!("{} active stations cannot be triangulated ({e}); slice masked", active.len());
                None
            }
        })
        .collect();

    let per_slice = grid.n1 * grid.n2;
    let filled: Vec<(Vec<bool>, Vec<f64>)> = slices
        .par_iter()
        .enumerate()
        .map(|(k, vals)| {
            let mut mask = vec![false; per_slice];
            let mut rows = Vec::new();
            if let Some(st) = &stencils[set_of_slice[k]] {
                for (node, entry) in st.iter().enumerate() {
                    if let Some((ids, w)) = entry {
                        let u: f64 = (0..3).map(|j| w[j] * vals[ids[j]].unwrap()).sum();
                        mask[node] = true;
                        rows.extend_from_slice(&[times[k], lat[node / grid.n2], lon[node % grid.n2], u]);
                    }
                }
            }
            (mask, rows)
        })
        .collect();
    let mut mask = Vec::with_capacity(grid.nt * per_slice);
    let mut rows = Vec::new();
    for (m, r) in filled {
        mask.extend(m);
        rows.extend(r);
    }
    let names = ["t", "lat", "lon", "u"].map(String::from).to_vec();
    Ok(GriddedData {
        dataset: Dataset::new(2, 1, names, rows)?,
        mask,
        times,
        lat,
        lon,
    })
}
