//! Plain-text `key = value` run configuration.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Settings read from a configuration file. Every field is optional so that
/// command-line flags can override any of them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub mesh: Option<PathBuf>,
    pub spacing: Option<f64>,
    pub rho: Option<Vec<f64>>,
    pub n: Option<usize>,
    pub d: Option<f64>,
    pub seed: Option<u64>,
    pub sampling: Option<String>,
    pub source: Option<String>,
    pub threads: Option<usize>,
    pub levels: Option<usize>,
    pub iterations: Option<usize>,
    pub scale: Option<f64>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
    pub optimizer: Option<String>,
    pub variant: Option<String>,
    pub data_dir: Option<PathBuf>,
}

pub const KEYS: &[&str] = &[
    "mesh",
    "spacing",
    "rho",
    "n",
    "d",
    "seed",
    "sampling",
    "source",
    "threads",
    "levels",
    "iterations",
    "scale",
    "epochs",
    "lr",
    "batch",
    "optimizer",
    "variant",
    "data_dir",
];

fn bad(line: usize, msg: String) -> Error {
    Error::Parse {
        path: PathBuf::from("<config>"),
        line,
        msg,
    }
}

fn positive(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| bad(line, format!("{key}: '{v}' is not a number")))?;
    if !(x > 0.0) || !x.is_finite() {
        return Err(bad(line, format!("{key} must be positive, got {v}")));
    }
    Ok(x)
}

fn count(line: usize, key: &str, v: &str, min: usize) -> Result<usize> {
    let x: usize = v
        .parse()
        .map_err(|_| bad(line, format!("{key}: '{v}' is not a whole number")))?;
    if x < min {
        return Err(bad(line, format!("{key} must be at least {min}, got {x}")));
    }
    Ok(x)
}

fn choice(line: usize, key: &str, v: &str, options: &[&str]) -> Result<String> {
    if options.contains(&v) {
        Ok(v.to_string())
    } else {
        Err(bad(line, format!("{key}: '{v}' is not one of {}", options.join(", "))))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.split('#').next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| bad(line, format!("expected key = value, got '{s}'")))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "mesh" => c.mesh = Some(PathBuf::from(v)),
                "data_dir" => c.data_dir = Some(PathBuf::from(v)),
                "spacing" => c.spacing = Some(positive(line, k, v)?),
                "d" => c.d = Some(positive(line, k, v)?),
                "scale" => c.scale = Some(positive(line, k, v)?),
                "lr" => {
                    let x: f64 = v.parse().map_err(|_| bad(line, format!("lr: '{v}' is not a number")))?;
                    if !(x >= 0.0) || !x.is_finite() {
                        return Err(bad(line, format!("lr must be non-negative, got {v}")));
                    }
                    c.lr = Some(x);
                }
                "rho" => {
                    let r = v
                        .split(',')
                        .map(|x| positive(line, k, x.trim()))
                        .collect::<Result<Vec<f64>>>()?;
                    if r.windows(2).any(|w| w[1] <= w[0]) {
                        return Err(bad(line, "rho schedule must strictly increase".into()));
                    }
                    c.rho = Some(r);
                }
                "n" => {
                    let n = count(line, k, v, 2)?;
                    if n % 2 != 0 {
                        return Err(bad(line, format!("n must be even, got {n}")));
                    }
                    c.n = Some(n);
                }
                "seed" => {
                    c.seed = Some(
                        v.parse()
                            .map_err(|_| bad(line, format!("seed: '{v}' is not a whole number")))?,
                    )
                }
                "threads" => c.threads = Some(count(line, k, v, 1)?),
                "levels" => c.levels = Some(count(line, k, v, 1)?),
                "iterations" => c.iterations = Some(count(line, k, v, 0)?),
                "epochs" => c.epochs = Some(count(line, k, v, 0)?),
                "batch" => c.batch = Some(count(line, k, v, 1)?),
                "sampling" => c.sampling = Some(choice(line, k, v, &["lattice", "poisson", "fps"])?),
                "source" => c.source = Some(choice(line, k, v, &["color", "texture", "normal", "constant"])?),
                "optimizer" => c.optimizer = Some(choice(line, k, v, &["sgd", "adam"])?),
                "variant" => c.variant = Some(choice(line, k, v, &["baseline", "rosy"])?),
                _ => return Err(bad(line, format!("unknown key '{k}' (known: {})", KEYS.join(", ")))),
            }
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Open {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { line, msg, .. } => Error::Parse {
                path: path.to_path_buf(),
                line,
                msg,
            },
            other => other,
        })
    }
}
