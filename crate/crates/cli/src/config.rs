use std::fs;
use std::path::{Path, PathBuf};

use episir::models::reference;
use episir::{DeriveConfig, ExtendedParams, FitConfig, GlobalEffects, InitialState, IntegratorConfig, ModelKind, SirParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Everything a run needs. Input paths are resolved against the directory of
/// the config file; `out_dir` is taken relative to the working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: DataPaths,
    pub derive: DeriveConfig,
    pub fit: FitConfig,
    /// Used by `simulate` and for the fitted trajectories written by `fit`.
    pub integrator: IntegratorConfig,
    pub simulate: SimulateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("episir-out"),
            data: DataPaths::default(),
            derive: DeriveConfig::default(),
            fit: FitConfig::default(),
            integrator: IntegratorConfig::default(),
            simulate: SimulateConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    /// Raw daily case table, input of `preprocess`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw: Option<PathBuf>,
    /// Derived S/I/R series, input of `fit`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelKind,
    pub days: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<PathBuf>,
    pub y0: InitialState,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Extended,
            days: 212,
            params: None,
            y0: reference::KC_INITIAL,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.data.raw, &mut config.data.series, &mut config.simulate.params]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if !p.exists() {
                return Err(CliError::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "referenced by config"),
                ));
            }
        }
        config.fit.validate().map_err(|e| CliError::Config(e.to_string()))?;
        config.integrator.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(config)
    }

    pub fn default_toml() -> String {
        toml::to_string_pretty(&RunConfig::default()).expect("default config serializes")
    }
}

/// Parameter file read by `simulate` and written by `fit`. Global-effect
/// fields may be omitted for the standard model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelKind>,
    pub beta: f64,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y0: Option<InitialState>,
}

impl ParamsFile {
    pub fn new(model: ModelKind, params: &ExtendedParams, y0: InitialState) -> Self {
        let g = params.global;
        let ext = |v: f64| (model == ModelKind::Extended).then_some(v);
        Self {
            model: Some(model),
            beta: params.sir.beta,
            gamma: params.sir.gamma,
            lambda: ext(g.lambda),
            a1: ext(g.a1),
            b1: ext(g.b1),
            c1: ext(g.c1),
            a2: ext(g.a2),
            b2: ext(g.b2),
            c2: ext(g.c2),
            p1: ext(g.p1),
            p2: ext(g.p2),
            y0: Some(y0),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.message().to_string())
        };
        parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("parameter file serializes")
    }

    /// Parameters for `model`; the extended model needs every global field.
    pub fn params(&self, model: ModelKind) -> Result<ExtendedParams, CliError> {
        let sir = SirParams::new(self.beta, self.gamma);
        if model == ModelKind::Standard {
            return Ok(ExtendedParams::standard(sir));
        }
        let fields = [
            ("lambda", self.lambda),
            ("a1", self.a1),
            ("b1", self.b1),
            ("c1", self.c1),
            ("a2", self.a2),
            ("b2", self.b2),
            ("c2", self.c2),
            ("p1", self.p1),
            ("p2", self.p2),
        ];
        let missing: Vec<&str> = fields.iter().filter(|(_, v)| v.is_none()).map(|(n, _)| *n).collect();
        if !missing.is_empty() {
            return Err(CliError::Config(format!(
                "extended model needs {} in the parameter file",
                missing.join(", ")
            )));
        }
        let v = fields.map(|(_, v)| v.unwrap());
        Ok(ExtendedParams::new(
            sir,
            GlobalEffects {
                lambda: v[0],
                a1: v[1],
                b1: v[2],
                c1: v[3],
                a2: v[4],
                b2: v[5],
                c2: v[6],
                p1: v[7],
                p2: v[8],
            },
        ))
    }
}
