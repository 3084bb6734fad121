use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{LibraryConfig, ModelKind, RunConfig};
use super::manifest::{short, Manifest};
use crate::dataset::Dataset;
use crate::discover::{fit_linear_pde, fit_operator_net, CoordinateFrame, DiscoveredModel, ModelArtifact};
use crate::error::{Error, Result};
use crate::features::{build_design_matrix, DerivativeSamples, DesignMatrix, LibrarySpec, TermNaming};
use crate::ingest::{
    default_cache_dir, fetch_observations, interpolate_to_grid, parse_station_json, read_dataset_csv,
    smhi_to_record, write_dataset_csv, HttpTransport, StationRecord,
};
use crate::net::{Mlp, NetworkDoc};
use crate::select::{feature_report, grid_search_architecture_samples, grid_search_mk_samples};
use crate::simulate::{rollout_mse, rollout_ode, solve_burgers, trajectory_to_dataset, BurgersConfig, PointwiseModel};
use crate::surrogate::{fit_surrogate, SurrogateReport};
use crate::transforms::{back_transform_model, AffineTransform, CoordinateTransform};

pub const DATA_FILE: &str = "data.csv";
pub const SURROGATE_FILE: &str = "surrogate.json";
pub const MODEL_FILE: &str = "model.json";
pub const GRID_MK_FILE: &str = "grid_mk.csv";
pub const GRID_ARCH_FILE: &str = "grid_arch.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const ROLLOUT_FILE: &str = "rollout.csv";
pub const ROLLOUT_MSE_FILE: &str = "rollout_mse.csv";
pub const INGEST_FILE: &str = "ingest.json";
pub const REPORT_FILE: &str = "report.txt";

/// Fitted surrogate with the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateArtifact {
    pub config_hash: String,
    pub space_names: Vec<String>,
    pub output_names: Vec<String>,
    pub report: SurrogateReport,
    /// Network on transformed coordinates when `network.transform` is set.
    pub network: NetworkDoc,
}

/// Gridding summary written by `ingest`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestArtifact {
    pub config_hash: String,
    pub stations: usize,
    pub station_errors: Vec<String>,
    pub reordered: usize,
    pub duplicates: usize,
    pub nodes: usize,
    pub valid_nodes: usize,
    pub times: Vec<f64>,
    pub lat: Vec<f64>,
    pub lon: Vec<f64>,
    /// One character per node in (t, lat, lon) order, `1` when valid.
    pub mask: String,
}

pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub hash: String,
}

impl Context {
    fn path(&self, file: &str) -> PathBuf {
        self.out.join(file)
    }

    fn manifest(&self) -> Result<Manifest> {
        Manifest::load_or_new(&self.out, &self.hash)
    }

    fn write_json<T: Serialize>(&self, file: &str, value: &T) -> Result<()> {
        std::fs::write(self.path(file), serde_json::to_string_pretty(value)?)?;
        Ok(())
    }

    fn data_source(&self) -> (PathBuf, Option<&'static str>) {
        match &self.cfg.dataset {
            Some(p) => (p.clone(), None),
            None => (self.path(DATA_FILE), Some(DATA_FILE)),
        }
    }

    fn load_dataset(&self) -> Result<Dataset> {
        let (path, _) = self.data_source();
        if !path.exists() {
            return Err(Error::Usage(format!(
                "no dataset at {}; run simulate or ingest first, or set \"dataset\"",
                path.display()
            )));
        }
        read_dataset_csv(&path)
    }

    fn load_surrogate(&self) -> Result<(SurrogateArtifact, Mlp)> {
        let path = self.path(SURROGATE_FILE);
        if !path.exists() {
            return Err(Error::Usage(format!("no fitted surrogate at {}; run fit first", path.display())));
        }
        let art: SurrogateArtifact = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
        self.check_hash(SURROGATE_FILE, &art.config_hash);
        let net = art.network.to_mlp()?;
        Ok((art, net))
    }

    fn load_model(&self) -> Result<ModelArtifact> {
        let path = self.path(MODEL_FILE);
        if !path.exists() {
            return Err(Error::Usage(format!("no discovered model at {}; run discover first", path.display())));
        }
        let art = ModelArtifact::from_json(&std::fs::read_to_string(&path)?)?;
        self.check_hash(MODEL_FILE, &art.config_hash);
        Ok(art)
    }

    fn check_hash(&self, file: &str, hash: &str) {
        if hash != self.hash {
            log::warn!(
                "{file} was produced with config {} but the current config is {}; report will refuse this chain",
                short(hash),
                short(&self.hash)
            );
        }
    }

    /// Dataset points in the surrogate's input coordinates.
    fn surrogate_points(&self, art: &SurrogateArtifact, max_rows: Option<usize>) -> Result<(Dataset, Vec<f64>)> {
        let mut data = self.load_dataset()?;
        if data.space_names() != art.space_names.as_slice() || data.output_names() != art.output_names.as_slice() {
            return Err(Error::Usage("dataset columns differ from the ones the surrogate was fitted on".into()));
        }
        if let Some(cap) = max_rows {
            if data.len() > cap {
                let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
                let mut idx = sample(&mut rng, data.len(), cap).into_vec();
                idx.sort_unstable();
                data = data.select(&idx);
            }
        }
        let points = match &art.network.transform {
            Some(t) => t.apply(&data)?.inputs(),
            None => data.inputs(),
        };
        Ok((data, points))
    }
}

fn naming_of(art: &SurrogateArtifact) -> TermNaming {
    TermNaming::new(art.space_names.clone(), art.output_names.clone())
}

fn library_spec(lib: &LibraryConfig, n_space: usize, n_out: usize) -> LibrarySpec {
    let mut spec = LibrarySpec::new(lib.m, lib.k, n_space, n_out);
    spec.include_coords = lib.include_coords;
    spec.include_bias = lib.include_bias;
    spec
}

fn restrict(design: DesignMatrix, terms: &Option<Vec<String>>) -> Result<DesignMatrix> {
    let Some(terms) = terms else { return Ok(design) };
    let keep = terms
        .iter()
        .map(|t| {
            design.find(t).ok_or_else(|| {
                Error::Config(format!("library has no column {t:?}; available: {}", design.names.join(", ")))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(design.select_columns(&keep))
}

pub fn simulate(ctx: &Context) -> Result<String> {
    let traj = solve_burgers(&ctx.cfg.simulate)?;
    let data = trajectory_to_dataset(&traj, ctx.cfg.drop_boundaries, true)?;
    write_dataset_csv(&data, &ctx.path(DATA_FILE))?;
    ctx.manifest()?.record(&ctx.out, "simulate", &ctx.hash, &[DATA_FILE], &[])?;
    Ok(format!("wrote {} rows to {DATA_FILE}", data.len()))
}

pub fn fit(ctx: &Context) -> Result<String> {
    let data = ctx.load_dataset()?;
    let transform = ctx.cfg.transform.then(|| AffineTransform::fit_shift_scale(&data));
    let train = match &transform {
        Some(t) => t.apply(&data)?,
        None => data.clone(),
    };
    let start = Instant::now();
    let (net, report) = fit_surrogate(&train, &ctx.cfg.surrogate)?;
    log::info!("surrogate fitted in {:.1?}", start.elapsed());
    let art = SurrogateArtifact {
        config_hash: ctx.hash.clone(),
        space_names: data.space_names().to_vec(),
        output_names: data.output_names().to_vec(),
        report: report.clone(),
        network: NetworkDoc::from_mlp(&net, transform),
    };
    ctx.write_json(SURROGATE_FILE, &art)?;
    let inputs: Vec<&str> = ctx.data_source().1.into_iter().collect();
    ctx.manifest()?.record(&ctx.out, "fit", &ctx.hash, &[SURROGATE_FILE], &inputs)?;
    Ok(format!(
        "surrogate: train MSE {:.3e}, validation MSE {:.3e}, {} iterations ({:?})",
        report.train_mse, report.validation_mse, report.iterations, report.termination
    ))
}

pub fn discover(ctx: &Context) -> Result<String> {
    let (art, net) = ctx.load_surrogate()?;
    let dc = &ctx.cfg.discover;
    let (_, points) = ctx.surrogate_points(&art, dc.max_rows)?;
    let spec = library_spec(&dc.library, art.space_names.len(), art.output_names.len());
    let design = build_design_matrix(&net, &points, &spec, naming_of(&art))?;
    let transform = art.network.transform.clone().map(CoordinateTransform::ShiftScale);
    let model = match dc.kind {
        ModelKind::Linear => {
            let mut model = fit_linear_pde(&restrict(design, &dc.library.terms)?, &dc.residual)?;
            if let Some(t) = &transform {
                model.frame = CoordinateFrame::Transformed;
                model = back_transform_model(&model, t)?;
            }
            DiscoveredModel::Linear(model)
        }
        ModelKind::Operator => {
            let mut op = fit_operator_net(&design, &dc.operator)?;
            if transform.is_some() {
                op.frame = CoordinateFrame::Transformed;
                op.transform = transform;
            }
            DiscoveredModel::Operator(op)
        }
    };
    let artifact = ModelArtifact::new(model, ctx.hash.clone());
    std::fs::write(ctx.path(MODEL_FILE), artifact.to_json()?)?;
    let mut inputs = vec![SURROGATE_FILE];
    inputs.extend(ctx.data_source().1);
    ctx.manifest()?.record(&ctx.out, "discover", &ctx.hash, &[MODEL_FILE], &inputs)?;
    Ok(format!("{}\nresidual loss {:.4e}", artifact.equation, artifact.model.residual_loss()))
}

pub fn gridsearch(ctx: &Context) -> Result<String> {
    let (art, net) = ctx.load_surrogate()?;
    let gc = &ctx.cfg.gridsearch;
    let (_, points) = ctx.surrogate_points(&art, ctx.cfg.discover.max_rows)?;
    let mut max_m = *gc.m.iter().max().expect("validated non-empty");
    if !gc.architectures.is_empty() {
        max_m = max_m.max(gc.architecture_m.iter().copied().max().unwrap_or(0));
    }
    let samples = DerivativeSamples::compute(&net, &points, max_m, naming_of(&art))?;
    let grid = grid_search_mk_samples(&samples, &gc.m, &gc.k, &ctx.cfg.discover.residual)?;
    grid.write_csv(&ctx.path(GRID_MK_FILE))?;
    let mut files = vec![GRID_MK_FILE];
    let mut summary = grid_summary(&grid);
    if !gc.architectures.is_empty() {
        let arch = grid_search_architecture_samples(
            &samples,
            &gc.architectures,
            &gc.architecture_m,
            gc.include_coords,
            &gc.operator,
        )?;
        arch.write_csv(&ctx.path(GRID_ARCH_FILE))?;
        files.push(GRID_ARCH_FILE);
        summary.push('\n');
        summary.push_str(&grid_summary(&arch));
    }
    let mut inputs = vec![SURROGATE_FILE];
    inputs.extend(ctx.data_source().1);
    ctx.manifest()?.record(&ctx.out, "gridsearch", &ctx.hash, &files, &inputs)?;
    Ok(summary)
}

fn grid_summary(grid: &crate::select::CostGrid) -> String {
    let mut s = format!("log10 cost, rows {} x columns {}\n", grid.row_axis, grid.col_axis);
    s += &format!("{:>10}", "");
    for c in &grid.col_labels {
        s += &format!("{c:>10}");
    }
    for (i, r) in grid.row_labels.iter().enumerate() {
        s += &format!("\n{r:>10}");
        for j in 0..grid.col_labels.len() {
            match grid.cell(i, j).log10_cost {
                Some(v) => s += &format!("{v:>10.3}"),
                None => s += &format!("{:>10}", "failed"),
            }
        }
    }
    s
}

pub fn features(ctx: &Context) -> Result<String> {
    let (art, net) = ctx.load_surrogate()?;
    let fc = &ctx.cfg.features;
    let (_, points) = ctx.surrogate_points(&art, ctx.cfg.discover.max_rows)?;
    let spec = library_spec(&fc.library, art.space_names.len(), art.output_names.len());
    let design = restrict(build_design_matrix(&net, &points, &spec, naming_of(&art))?, &fc.library.terms)?;
    let report = feature_report(&design, &fc.report)?;
    report.write_csv(&ctx.path(FEATURES_FILE))?;
    let mut inputs = vec![SURROGATE_FILE];
    inputs.extend(ctx.data_source().1);
    ctx.manifest()?.record(&ctx.out, "features", &ctx.hash, &[FEATURES_FILE], &inputs)?;
    let mut s = format!("{:>12} {:>12} {:>10} {:>5}", "term", "variance", "stability", "rfe");
    for (i, n) in report.names.iter().enumerate() {
        s += &format!(
            "\n{n:>12} {:>12.4e} {:>10.2} {:>5}",
            report.variance[i], report.stability[i], report.rfe_rank[i]
        );
    }
    Ok(s)
}

pub fn rollout(ctx: &Context) -> Result<String> {
    let art = ctx.load_model()?;
    if ctx.cfg.dataset.is_some() || ctx.manifest()?.producer(DATA_FILE) == Some("ingest") {
        return Err(Error::Usage("rollout compares against the simulated Burgers reference; run simulate first".into()));
    }
    if art.model.frame() != CoordinateFrame::Physical {
        return Err(Error::Usage("rollout needs a model in physical coordinates (fit with transform off)".into()));
    }
    let rhs = PointwiseModel::new(&art.model).map_err(|e| match e {
        Error::Config(m) => Error::Usage(m),
        other => other,
    })?;
    let rc = &ctx.cfg.rollout;
    let reference = solve_burgers(&BurgersConfig {
        t_end: rc.t_end,
        nt: rc.reference_nt,
        ..ctx.cfg.simulate.clone()
    })?;
    let nx = reference.x.len();
    let range = if ctx.cfg.drop_boundaries { 1..nx - 1 } else { 0..nx };
    let x = reference.x[range.clone()].to_vec();
    let u0 = reference.field(0)[range].to_vec();
    let times: Vec<f64> = (0..rc.n_times)
        .map(|k| rc.t_end * k as f64 / (rc.n_times - 1) as f64)
        .collect();
    let traj = rollout_ode(&rhs, &u0, &x, &times, &rc.integrator)?;
    traj.write_csv(&ctx.path(ROLLOUT_FILE))?;
    let curve = rollout_mse(&traj, &reference)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(ctx.path(ROLLOUT_MSE_FILE))?);
    writeln!(w, "t,mse")?;
    for (t, e) in &curve {
        writeln!(w, "{t:.17e},{e:.17e}")?;
    }
    w.flush()?;
    ctx.manifest()?
        .record(&ctx.out, "rollout", &ctx.hash, &[ROLLOUT_FILE, ROLLOUT_MSE_FILE], &[MODEL_FILE])?;
    let t_train = ctx.cfg.simulate.t_end;
    let inside = curve.iter().filter(|(t, _)| *t <= t_train + 1e-12).map(|c| c.1).fold(0.0, f64::max);
    let last = curve.last().map(|c| c.1).unwrap_or(f64::NAN);
    Ok(format!(
        "rollout MSE: max {inside:.3e} over [0, {t_train}], {last:.3e} at t = {}",
        rc.t_end
    ))
}

fn load_records(ctx: &Context) -> Result<(Vec<StationRecord>, Vec<String>, usize, usize)> {
    let ic = &ctx.cfg.ingest;
    if let Some(path) = &ic.stations {
        let parsed = parse_station_json(&std::fs::read_to_string(path)?)?;
        let errors = parsed
            .errors
            .iter()
            .map(|e| format!("station #{} ({}): {}", e.index, e.id.as_deref().unwrap_or("?"), e.message))
            .collect();
        return Ok((parsed.records, errors, parsed.reordered, parsed.duplicates));
    }
    if let Some(fc) = &ic.fetch {
        let cache = fc.cache_dir.clone().unwrap_or_else(default_cache_dir);
        let report = fetch_observations(&HttpTransport, &fc.base_url, &fc.ids, &fc.period, &cache)?;
        log::info!("fetched {} documents, {} network calls", report.documents.len(), report.network_calls);
        let mut errors: Vec<String> = report.errors.iter().map(|(id, m)| format!("station {id}: {m}")).collect();
        let mut records = Vec::new();
        for doc in &report.documents {
            match std::str::from_utf8(&doc.body).map_err(|e| Error::Document(e.to_string())).and_then(smhi_to_record) {
                Ok(r) => records.push(r),
                Err(e) => errors.push(format!("station {}: {e}", doc.id)),
            }
        }
        return Ok((records, errors, 0, 0));
    }
    Err(Error::Usage("ingest needs \"ingest.stations\" or \"ingest.fetch\" in the config".into()))
}

pub fn ingest(ctx: &Context) -> Result<String> {
    let (records, station_errors, reordered, duplicates) = load_records(ctx)?;
    let gridded = interpolate_to_grid(&records, &ctx.cfg.ingest.grid)?;
    write_dataset_csv(&gridded.dataset, &ctx.path(DATA_FILE))?;
    let art = IngestArtifact {
        config_hash: ctx.hash.clone(),
        stations: records.len(),
        station_errors,
        reordered,
        duplicates,
        nodes: gridded.mask.len(),
        valid_nodes: gridded.n_valid(),
        times: gridded.times.clone(),
        lat: gridded.lat.clone(),
        lon: gridded.lon.clone(),
        mask: gridded.mask.iter().map(|&m| if m { '1' } else { '0' }).collect(),
    };
    ctx.write_json(INGEST_FILE, &art)?;
    ctx.manifest()?.record(&ctx.out, "ingest", &ctx.hash, &[DATA_FILE, INGEST_FILE], &[])?;
    Ok(format!(
        "{} stations ({} rejected), {} of {} grid nodes valid",
        art.stations,
        art.station_errors.len(),
        art.valid_nodes,
        art.nodes
    ))
}

fn read_embedded_hash(path: &Path) -> Result<Option<String>> {
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    Ok(v.get("config_hash").and_then(|h| h.as_str()).map(str::to_string))
}

pub fn report(ctx: &Context) -> Result<String> {
    let manifest = Manifest::load(&ctx.out)?;
    manifest.verify(&ctx.out)?;
    for rec in manifest.stages.values() {
        for file in rec.artifacts.keys().filter(|f| f.ends_with(".json")) {
            match read_embedded_hash(&ctx.out.join(file))? {
                Some(h) if h == manifest.config_hash => {}
                _ => return Err(Error::Usage(format!("{file} does not carry the chain's config hash"))),
            }
        }
    }
    let mut s = format!(
        "pdedisc {} run report\nconfig {}\nstages: {}\n",
        manifest.crate_version,
        manifest.config_hash,
        manifest.stages.keys().cloned().collect::<Vec<_>>().join(", ")
    );
    if let Some(producer) = manifest.producer(DATA_FILE) {
        let data = read_dataset_csv(&ctx.out.join(DATA_FILE))?;
        s += &format!("\ndataset ({producer}): {} rows, columns {}\n", data.len(), data.names().join(","));
    }
    if manifest.stages.contains_key("fit") {
        let art: SurrogateArtifact = serde_json::from_str(&std::fs::read_to_string(ctx.out.join(SURROGATE_FILE))?)?;
        let r = &art.report;
        s += &format!(
            "\nsurrogate {:?}: train MSE {:.4e}, validation MSE {:.4e}, {} iterations, {:?}\n",
            art.network.layer_dims, r.train_mse, r.validation_mse, r.iterations, r.termination
        );
    }
    if manifest.stages.contains_key("discover") {
        let art = ModelArtifact::from_json(&std::fs::read_to_string(ctx.out.join(MODEL_FILE))?)?;
        s += &format!("\nmodel:\n  {}\n  residual loss {:.4e}\n", art.equation, art.model.residual_loss());
    }
    for (stage, file) in [("gridsearch", GRID_MK_FILE), ("gridsearch", GRID_ARCH_FILE), ("features", FEATURES_FILE), ("rollout", ROLLOUT_MSE_FILE)] {
        if manifest.stages.get(stage).is_some_and(|r| r.artifacts.contains_key(file)) {
            s += &format!("\n{file}:\n{}", std::fs::read_to_string(ctx.out.join(file))?);
        }
    }
    if manifest.stages.contains_key("ingest") {
        let art: IngestArtifact = serde_json::from_str(&std::fs::read_to_string(ctx.out.join(INGEST_FILE))?)?;
        s += &format!(
            "\ningest: {} stations, {} rejected, {} of {} nodes valid\n",
            art.stations,
            art.station_errors.len(),
            art.valid_nodes,
            art.nodes
        );
    }
    std::fs::write(ctx.out.join(REPORT_FILE), &s)?;
    Ok(s)
}
