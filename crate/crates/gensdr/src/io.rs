//! File formats: model JSON, dataset CSV with a JSON metadata sidecar, and
//! small CSV helpers. Floats are written with the shortest decimal
//! representation that round-trips, so save/load is exact and repeated runs
//! produce byte-identical files.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpolant::Schedule;
use crate::metrics::RepRecord;
use crate::numerics::{Matrix, MlpParams, MlpSpec};
use crate::simgen::spd::SpdMatrix2;
use crate::simgen::{Dataset, ResponseSet, SimSetting};
use crate::trainer::ensemble::{EnsembleMode, EnsembleModel, EnsembleSpec};
use crate::trainer::GenSdrModel;

pub const SCHEMA_VERSION: u32 = 1;

/// One serialized network: layer sizes, optional output clamp, and the flat
/// parameter vector (per layer: row-major weights, then biases).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetFile {
    pub layer_sizes: Vec<usize>,
    pub clamp: Option<(f64, f64)>,
    pub params: Vec<f64>,
}

impl NetFile {
    pub fn from_params(p: &MlpParams<f64>) -> Self {
        NetFile {
            layer_sizes: p.spec.layer_sizes.clone(),
            clamp: p.spec.clamp,
            params: p.flatten(),
        }
    }

    pub fn to_params(&self) -> Result<MlpParams<f64>> {
        let mut spec = MlpSpec::new(self.layer_sizes.clone(), 0);
        if let Some((lo, hi)) = self.clamp {
            spec = spec.with_clamp(lo, hi);
        }
        let mut params = crate::numerics::mlp_init(&spec, &mut crate::rng::Stream::new(0))?;
        params.unflatten_into(&self.params)?;
        Ok(params)
    }
}

/// Self-describing model file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model_type", rename_all = "kebab-case")]
pub enum ModelFile {
    GenSdr {
        schema_version: u32,
        d_x: usize,
        d: usize,
        d_y: usize,
        schedule: Schedule,
        tau: f64,
        standardize: Option<(Vec<f64>, Vec<f64>)>,
        r_net: NetFile,
        g_net: NetFile,
        /// Echo of the training configuration, for provenance.
        config: serde_json::Value,
    },
    Ensemble {
        schema_version: u32,
        d_x: usize,
        d: usize,
        schedule: Schedule,
        tau: f64,
        omega: f64,
        /// Reference SPD matrices as (a, b, c) triples.
        references: Vec<(f64, f64, f64)>,
        head_indices: Vec<usize>,
        r_net: NetFile,
        trunk: Option<NetFile>,
        /// Row-major `m x embed_dim` embeddings (trunk mode).
        embeddings: Option<Vec<f64>>,
        embed_dim: Option<usize>,
        heads: Option<Vec<NetFile>>,
        config: serde_json::Value,
    },
}

impl ModelFile {
    pub fn from_gensdr(m: &GenSdrModel<f64>, config: serde_json::Value) -> Self {
        ModelFile::GenSdr {
            schema_version: SCHEMA_VERSION,
            d_x: m.d_x,
            d: m.d,
            d_y: m.d_y,
            schedule: m.sched,
            tau: m.tau,
            standardize: m.standardize.clone(),
            r_net: NetFile::from_params(&m.r_net),
            g_net: NetFile::from_params(&m.g_net),
            config,
        }
    }

    pub fn from_ensemble(m: &EnsembleModel<f64>, config: serde_json::Value) -> Self {
        let (trunk, embeddings, embed_dim, heads) = match &m.mode {
            EnsembleMode::Trunk { g_net, embeddings } => (
                Some(NetFile::from_params(g_net)),
                Some(embeddings.data().to_vec()),
                Some(embeddings.cols()),
                None,
            ),
            EnsembleMode::Exact { heads } => {
                (None, None, None, Some(heads.iter().map(NetFile::from_params).collect()))
            }
        };
        ModelFile::Ensemble {
            schema_version: SCHEMA_VERSION,
            d_x: m.d_x,
            d: m.d,
            schedule: m.sched,
            tau: m.tau,
            omega: m.spec.omega,
            references: m.spec.references.iter().map(|r| (r.a, r.b, r.c)).collect(),
            head_indices: m.spec.head_indices.clone(),
            r_net: NetFile::from_params(&m.r_net),
            trunk,
            embeddings,
            embed_dim,
            heads,
            config,
        }
    }

    pub fn to_gensdr(&self) -> Result<GenSdrModel<f64>> {
        match self {
            ModelFile::GenSdr {
                schema_version,
                d_x,
                d,
                d_y,
                schedule,
                tau,
                standardize,
                r_net,
                g_net,
                ..
            } => {
                if *schema_version != SCHEMA_VERSION {
                    return Err(Error::Parse(format!("unsupported schema {schema_version}")));
                }
                Ok(GenSdrModel {
                    r_net: r_net.to_params()?,
                    g_net: g_net.to_params()?,
                    sched: *schedule,
                    tau: *tau,
                    standardize: standardize.clone(),
                    d_x: *d_x,
                    d: *d,
                    d_y: *d_y,
                })
            }
            ModelFile::Ensemble { .. } => {
                Err(Error::Parse("model file holds an ensemble model".into()))
            }
        }
    }

    pub fn to_ensemble(&self) -> Result<EnsembleModel<f64>> {
        match self {
            ModelFile::Ensemble {
                schema_version,
                d_x,
                d,
                schedule,
                tau,
                omega,
                references,
                head_indices,
                r_net,
                trunk,
                embeddings,
                embed_dim,
                heads,
                ..
            } => {
                if *schema_version != SCHEMA_VERSION {
                    return Err(Error::Parse(format!("unsupported schema {schema_version}")));
                }
                let refs = references
                    .iter()
                    .map(|&(a, b, c)| SpdMatrix2::new(a, b, c))
                    .collect::<Result<Vec<_>>>()?;
                let mode = match (trunk, heads) {
                    (Some(t), None) => {
                        let flat = embeddings
                            .as_ref()
                            .ok_or_else(|| Error::Parse("trunk model without embeddings".into()))?;
                        let p = embed_dim
                            .ok_or_else(|| Error::Parse("trunk model without embed_dim".into()))?;
                        let m = head_indices.len();
                        EnsembleMode::Trunk {
                            g_net: t.to_params()?,
                            embeddings: Matrix::from_vec(m, p, flat.clone())?,
                        }
                    }
                    (None, Some(hs)) => EnsembleMode::Exact {
                        heads: hs.iter().map(NetFile::to_params).collect::<Result<Vec<_>>>()?,
                    },
                    _ => return Err(Error::Parse("ensemble model needs trunk xor heads".into())),
                };
                Ok(EnsembleModel {
                    r_net: r_net.to_params()?,
                    mode,
                    spec: EnsembleSpec {
                        references: refs,
                        omega: *omega,
                        head_indices: head_indices.clone(),
                    },
                    sched: *schedule,
                    tau: *tau,
                    d_x: *d_x,
                    d: *d,
                })
            }
            ModelFile::GenSdr { .. } => {
                Err(Error::Parse("model file holds a plain model".into()))
            }
        }
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn save_model(path: &Path, model: &ModelFile) -> Result<()> {
    write_json(path, model)
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    read_json(path)
}

/// Dataset sidecar: everything needed to reproduce and reinterpret the CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub schema_version: u32,
    pub setting: SimSetting,
    pub seed: u64,
    pub spd: bool,
    pub n: usize,
    pub d_x: usize,
    /// Response columns in the CSV: `d_y` for Euclidean, 3 for SPD (a, b, c).
    pub y_cols: usize,
    pub d: usize,
    /// Distribution parameterization conventions used by the generator.
    pub conventions: String,
}

impl DatasetMeta {
    pub fn new(setting: SimSetting, seed: u64) -> Self {
        let spd = setting.is_spd();
        DatasetMeta {
            schema_version: SCHEMA_VERSION,
            setting,
            seed,
            spd,
            n: setting.n,
            d_x: setting.d_x,
            y_cols: if spd { 3 } else { setting.d_y },
            d: setting.true_dim(),
            conventions: "gamma(shape,rate) in setting A noise; laplace(loc,scale); \
                          normal(mean,variance)"
                .into(),
        }
    }
}

fn write_row(out: &mut String, values: impl Iterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        first = false;
        out.push_str(&format!("{v}"));
    }
    out.push('\n');
}

/// Write `data.csv` (X, Y, r_true columns) and `metadata.json` into `dir`.
pub fn write_dataset(dir: &Path, ds: &Dataset<f64>, meta: &DatasetMeta) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut csv = String::new();
    let mut header: Vec<String> = (1..=meta.d_x).map(|j| format!("x{j}")).collect();
    match &ds.y {
        ResponseSet::Euclidean(y) => {
            header.extend((1..=y.cols()).map(|j| format!("y{j}")));
        }
        ResponseSet::Spd(_) => {
            header.extend(["y_a".to_string(), "y_b".to_string(), "y_c".to_string()]);
        }
    }
    header.extend((1..=ds.r_true.cols()).map(|j| format!("r{j}")));
    csv.push_str(&header.join(","));
    csv.push('\n');
    for i in 0..ds.x.rows() {
        let y_vals: Vec<f64> = match &ds.y {
            ResponseSet::Euclidean(y) => y.row(i).to_vec(),
            ResponseSet::Spd(v) => vec![v[i].a, v[i].b, v[i].c],
        };
        write_row(
            &mut csv,
            ds.x
                .row(i)
                .iter()
                .copied()
                .chain(y_vals)
                .chain(ds.r_true.row(i).iter().copied()),
        );
    }
    fs::write(dir.join("data.csv"), csv)?;
    write_json(&dir.join("metadata.json"), meta)
}

/// Read a dataset directory written by [`write_dataset`].
pub fn read_dataset(dir: &Path) -> Result<(Dataset<f64>, DatasetMeta)> {
    let meta: DatasetMeta = read_json(&dir.join("metadata.json"))?;
    let text = fs::read_to_string(dir.join("data.csv"))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty csv".into()))?;
    let n_cols = header.split(',').count();
    let expected = meta.d_x + meta.y_cols + meta.d;
    if n_cols != expected {
        return Err(Error::Parse(format!("csv has {n_cols} columns, metadata implies {expected}")));
    }
    let mut x_rows = Vec::new();
    let mut y_rows = Vec::new();
    let mut r_rows = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", ln + 2))))
            .collect::<Result<_>>()?;
        if vals.len() != expected {
            return Err(Error::Parse(format!("line {}: {} fields", ln + 2, vals.len())));
        }
        x_rows.push(vals[..meta.d_x].to_vec());
        y_rows.push(vals[meta.d_x..meta.d_x + meta.y_cols].to_vec());
        r_rows.push(vals[meta.d_x + meta.y_cols..].to_vec());
    }
    let x = Matrix::from_rows(&x_rows)?;
    let r_true = Matrix::from_rows(&r_rows)?;
    let y = if meta.spd {
        ResponseSet::Spd(
            y_rows
                .iter()
                .map(|r| SpdMatrix2::new(r[0], r[1], r[2]))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        ResponseSet::Euclidean(Matrix::from_rows(&y_rows)?)
    };
    Ok((Dataset { x, y, r_true }, meta))
}

/// Plain numeric CSV with a header row.
pub fn write_matrix_csv(path: &Path, header: &[String], m: &Matrix<f64>) -> Result<()> {
    if header.len() != m.cols() {
        return Err(Error::shape("csv header", m.cols(), header.len()));
    }
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..m.rows() {
        write_row(&mut out, m.row(i).iter().copied());
    }
    fs::write(path, out)?;
    Ok(())
}

/// Per-replication benchmark records.
pub fn write_report_csv(path: &Path, records: &[RepRecord]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "setting,param_key,param_value,rep,seed,dcor,wall_ms")?;
    for r in records {
        writeln!(
            f,
            "{},{},{},{},{},{},{}",
            r.setting, r.param_key, r.param_value, r.rep, r.seed, r.dcor, r.wall_ms
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use crate::simgen::{generate, XDist};
    use crate::trainer::{train, TrainConfig};

    fn tmpdir(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("gensdr-io-test-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn dataset_roundtrip_euclidean() {
        let setting = SimSetting::b(0.3, 30, 5);
        let ds = generate::<f64>(&setting, &mut Stream::new(1)).unwrap();
        let dir = tmpdir("euclid");
        let meta = DatasetMeta::new(setting, 1);
        write_dataset(&dir, &ds, &meta).unwrap();
        let (back, meta2) = read_dataset(&dir).unwrap();
        assert_eq!(ds, back);
        assert_eq!(meta.setting, meta2.setting);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn dataset_roundtrip_spd() {
        let setting = SimSetting::f(20, 4);
        let ds = generate::<f64>(&setting, &mut Stream::new(2)).unwrap();
        let dir = tmpdir("spd");
        write_dataset(&dir, &ds, &DatasetMeta::new(setting, 2)).unwrap();
        let (back, meta) = read_dataset(&dir).unwrap();
        assert!(meta.spd);
        assert_eq!(ds, back);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn dataset_files_are_byte_identical_across_writes() {
        let setting = SimSetting::a(XDist::Uniform, 25, 4);
        let ds = generate::<f64>(&setting, &mut Stream::new(3)).unwrap();
        let meta = DatasetMeta::new(setting, 3);
        let (d1, d2) = (tmpdir("bytes1"), tmpdir("bytes2"));
        write_dataset(&d1, &ds, &meta).unwrap();
        write_dataset(&d2, &ds, &meta).unwrap();
        assert_eq!(
            fs::read(d1.join("data.csv")).unwrap(),
            fs::read(d2.join("data.csv")).unwrap()
        );
        assert_eq!(
            fs::read(d1.join("metadata.json")).unwrap(),
            fs::read(d2.join("metadata.json")).unwrap()
        );
        fs::remove_dir_all(&d1).unwrap();
        fs::remove_dir_all(&d2).unwrap();
    }

    #[test]
    fn model_roundtrip_is_exact() {
        let mut rng = Stream::new(4);
        let mut x = Matrix::<f64>::zeros(40, 3);
        for v in x.data_mut() {
            *v = rng.uniform::<f64>();
        }
        let mut y = Matrix::<f64>::zeros(40, 2);
        for v in y.data_mut() {
            *v = rng.normal::<f64>();
        }
        let cfg = TrainConfig { epochs: 2, batch_size: 20, ..TrainConfig::default() };
        let (model, _) =
            train(&x, &y, 1, &[6], &[6], crate::interpolant::Schedule::StraightLine, &cfg).unwrap();
        let dir = tmpdir("model");
        let path = dir.join("model.json");
        let file = ModelFile::from_gensdr(&model, serde_json::to_value(&cfg).unwrap());
        save_model(&path, &file).unwrap();
        let back = load_model(&path).unwrap().to_gensdr().unwrap();
        assert_eq!(model.r_net.flatten(), back.r_net.flatten());
        assert_eq!(model.g_net.flatten(), back.g_net.flatten());
        assert_eq!(model.represent(&x).unwrap(), back.represent(&x).unwrap());
        assert!(load_model(&path).unwrap().to_ensemble().is_err());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn ensemble_model_roundtrip() {
        use crate::trainer::ensemble::{build_kernel_ensemble, train_ensemble, EnsembleConfig};
        let setting = SimSetting::f(40, 4);
        let ds = generate::<f64>(&setting, &mut Stream::new(5)).unwrap();
        let ys = ds.y.as_spd().unwrap();
        let spec = build_kernel_ensemble(ys, 0.5, 4, &mut Stream::new(6)).unwrap();
        let cfg = TrainConfig { epochs: 1, batch_size: 20, ..TrainConfig::default() };
        let ecfg = EnsembleConfig { m: 4, heads_per_batch: 2, ..EnsembleConfig::default() };
        let (model, _) = train_ensemble(
            &ds.x,
            ys,
            spec,
            1,
            &[6],
            crate::interpolant::Schedule::StraightLine,
            &cfg,
            &ecfg,
        )
        .unwrap();
        let dir = tmpdir("ens");
        let path = dir.join("model.json");
        save_model(&path, &ModelFile::from_ensemble(&model, serde_json::Value::Null)).unwrap();
        let back = load_model(&path).unwrap().to_ensemble().unwrap();
        assert_eq!(model.represent(&ds.x).unwrap(), back.represent(&ds.x).unwrap());
        assert_eq!(model.spec.omega, back.spec.omega);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn matrix_csv_and_report_csv() {
        let dir = tmpdir("csv");
        let m = Matrix::from_vec(2, 2, vec![1.5, -0.25, 3.0, 0.1]).unwrap();
        let path = dir.join("m.csv");
        write_matrix_csv(&path, &["a".into(), "b".into()], &m).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "a,b\n1.5,-0.25\n3,0.1\n");
        assert!(write_matrix_csv(&path, &["a".into()], &m).is_err());
        write_report_csv(
            &dir.join("r.csv"),
            &[RepRecord {
                setting: "A".into(),
                param_key: "x_dist".into(),
                param_value: "uniform".into(),
                rep: 0,
                seed: 9,
                dcor: 0.5,
                wall_ms: 12,
            }],
        )
        .unwrap();
        let text = fs::read_to_string(dir.join("r.csv")).unwrap();
        assert!(text.contains("A,x_dist,uniform,0,9,0.5,12"));
        fs::remove_dir_all(&dir).unwrap();
    }
}
