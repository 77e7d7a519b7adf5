//! Run configuration: a single JSON document, validated field by field
//! before anything large is allocated. CLI flags override config fields.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use bosefold::fock::{self, ModeTuple};
use bosefold::hamiltonian::{BhBasis, BhParams, Boundary, Drive, OmParams, SiteCouplings};
use bosefold::propagator::StepOrder;
use bosefold::{StateVector, C64};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    BoseHubbard,
    Optomech,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryCfg {
    Periodic,
    Open,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderCfg {
    FirstAscending,
    FirstDescending,
    Second,
}

impl From<OrderCfg> for StepOrder {
    fn from(o: OrderCfg) -> Self {
        match o {
            OrderCfg::FirstAscending => StepOrder::FirstAscending,
            OrderCfg::FirstDescending => StepOrder::FirstDescending,
            OrderCfg::Second => StepOrder::Second,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisCfg {
    Island(u64),
    Capped(Vec<u64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriveCfg {
    Constant(f64),
    Table { times: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialStateCfg {
    Fock(Vec<u64>),
    UniformIsland,
    File(PathBuf),
}

fn default_sample_every() -> u64 {
    1
}

fn default_order() -> OrderCfg {
    OrderCfg::Second
}

/// The JSON document driving one simulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Model,

    // Bose-Hubbard fields
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_per_site: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_per_site: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_per_site: Option<Vec<f64>>,

    // optomechanical fields
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub na: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nb: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveCfg>,

    // stepping
    #[serde(default = "default_order")]
    pub order: OrderCfg,
    pub dt: f64,
    pub n_steps: u64,
    #[serde(default = "default_sample_every")]
    pub sample_every: u64,
    pub initial_state: InitialStateCfg,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// A validated configuration, ready to build plans from.
pub struct Resolved {
    pub system: ResolvedSystem,
    pub order: StepOrder,
    pub dt: f64,
    pub n_steps: u64,
    pub sample_every: u64,
    pub initial: InitialStateCfg,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

pub enum ResolvedSystem {
    Bh(BhParams),
    Om(OmParams),
}

impl RunConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    /// Validate every field and resolve into model parameters. No basis or
    /// state is materialized here.
    pub fn resolve(&self) -> Result<Resolved> {
        if !self.dt.is_finite() || self.dt == 0.0 {
            bail!("dt: must be finite and nonzero, got {}", self.dt);
        }
        if self.sample_every == 0 {
            bail!("sample_every: must be >= 1");
        }
        let system = match self.model {
            Model::BoseHubbard => ResolvedSystem::Bh(self.resolve_bh()?),
            Model::Optomech => ResolvedSystem::Om(self.resolve_om()?),
        };
        self.validate_initial_state(&system)?;
        Ok(Resolved {
            system,
            order: self.order.into(),
            dt: self.dt,
            n_steps: self.n_steps,
            sample_every: self.sample_every,
            initial: self.initial_state.clone(),
            seed: self.seed,
            out: self.out.clone(),
        })
    }

    fn resolve_bh(&self) -> Result<BhParams> {
        let k = self.sites.ok_or_else(|| anyhow!("sites: required for model bose-hubbard"))?;
        if k < 2 {
            bail!("sites: must be >= 2, got {k}");
        }
        for (name, val) in [("na", self.na.is_some()), ("nb", self.nb.is_some()), ("drive", self.drive.is_some())] {
            if val {
                bail!("{name}: not a bose-hubbard field");
            }
        }
        let boundary = match self.boundary.unwrap_or(BoundaryCfg::Periodic) {
            BoundaryCfg::Periodic => Boundary::Periodic,
            BoundaryCfg::Open => Boundary::Open,
        };
        let basis = match self
            .basis
            .clone()
            .ok_or_else(|| anyhow!("basis: required for model bose-hubbard"))?
        {
            BasisCfg::Island(n_total) => BhBasis::Island { n_total },
            BasisCfg::Capped(caps) => {
                if caps.len() != k {
                    bail!("basis.capped: needs {k} caps, got {}", caps.len());
                }
                BhBasis::Capped { caps }
            }
        };
        let (mu, u, j) = (
            self.mu.unwrap_or(0.0),
            self.u.unwrap_or(0.0),
            self.j.unwrap_or(0.0),
        );
        let mut params = BhParams::new(k, boundary, mu, u, j, basis)?;
        if self.mu_per_site.is_some() || self.u_per_site.is_some() || self.j_per_site.is_some() {
            let fill = |v: &Option<Vec<f64>>, scalar: f64, name: &str| -> Result<Vec<f64>> {
                match v {
                    None => Ok(vec![scalar; k]),
                    Some(list) if list.len() == k => Ok(list.clone()),
                    Some(list) => bail!("{name}: needs {k} values, got {}", list.len()),
                }
            };
            params = params.with_site_couplings(SiteCouplings {
                mu: fill(&self.mu_per_site, mu, "mu_per_site")?,
                u: fill(&self.u_per_site, u, "u_per_site")?,
                j: fill(&self.j_per_site, j, "j_per_site")?,
            })?;
        }
        Ok(params)
    }

    fn resolve_om(&self) -> Result<OmParams> {
        for (name, set) in [
            ("sites", self.sites.is_some()),
            ("basis", self.basis.is_some()),
            ("boundary", self.boundary.is_some()),
        ] {
            if set {
                bail!("{name}: not an optomech field");
            }
        }
        let na = self.na.ok_or_else(|| anyhow!("na: required for model optomech"))?;
        let nb = self.nb.ok_or_else(|| anyhow!("nb: required for model optomech"))?;
        let drive = match self
            .drive
            .clone()
            .ok_or_else(|| anyhow!("drive: required for model optomech"))?
        {
            DriveCfg::Constant(e) => Drive::Constant(e),
            DriveCfg::Table { times, values } => {
                let d = Drive::Table { times, values };
                d.validate().map_err(|e| anyhow!("drive: {e}"))?;
                d
            }
        };
        Ok(OmParams { na, nb, drive })
    }

    fn validate_initial_state(&self, system: &ResolvedSystem) -> Result<()> {
        match (&self.initial_state, system) {
            (InitialStateCfg::Fock(t), ResolvedSystem::Bh(p)) => {
                if t.len() != p.k {
                    bail!(
                        "initial_state.fock: needs {} occupation numbers, got {}",
                        p.k,
                        t.len()
                    );
                }
                match &p.basis {
                    BhBasis::Island { n_total } => {
                        let total: u64 = t.iter().sum();
                        if total != *n_total {
                            bail!(
                                "initial_state.fock: total occupation {total} is outside the \
                                 declared island N = {n_total}"
                            );
                        }
                    }
                    BhBasis::Capped { caps } => {
                        for (i, (n, c)) in t.iter().zip(caps).enumerate() {
                            if n > c {
                                bail!(
                                    "initial_state.fock: site {} occupation {n} exceeds cap {c}",
                                    i + 1
                                );
                            }
                        }
                    }
                }
            }
            (InitialStateCfg::Fock(t), ResolvedSystem::Om(p)) => {
                if t.len() != 2 {
                    bail!("initial_state.fock: optomech takes [n_a, n_b], got {} entries", t.len());
                }
                if t[0] as usize > p.na || t[1] as usize > p.nb {
                    bail!(
                        "initial_state.fock: ({}, {}) outside caps ({}, {})",
                        t[0],
                        t[1],
                        p.na,
                        p.nb
                    );
                }
            }
            (InitialStateCfg::UniformIsland, ResolvedSystem::Bh(p)) => {
                if !matches!(p.basis, BhBasis::Island { .. }) {
                    bail!("initial_state: uniform-island requires an island basis");
                }
            }
            (InitialStateCfg::UniformIsland, ResolvedSystem::Om(_)) => {
                bail!("initial_state: uniform-island is not defined for optomech (no island)");
            }
            (InitialStateCfg::File(_), _) => {}
        }
        Ok(())
    }
}

impl Resolved {
    /// Materialize the initial state in the system's home ordering.
    pub fn initial_state(&self, dim: usize) -> Result<StateVector> {
        match (&self.initial, &self.system) {
            (InitialStateCfg::Fock(t), ResolvedSystem::Bh(p)) => {
                let tuple = ModeTuple::new(t.clone())?;
                let index = match &p.basis {
                    BhBasis::Island { n_total } => {
                        let spec = fock::island_spec(*n_total, p.k)?;
                        (fock::skolem(&tuple)? - spec.z_low) as usize
                    }
                    BhBasis::Capped { .. } => {
                        let z = fock::skolem(&tuple)?;
                        p.basis_tuples()?
                            .iter()
                            .position(|x| fock::skolem(x).map(|zz| zz == z).unwrap_or(false))
                            .ok_or_else(|| anyhow!("initial fock state not in the capped box"))?
                    }
                };
                Ok(StateVector::fock(dim, index)?)
            }
            (InitialStateCfg::Fock(t), ResolvedSystem::Om(p)) => {
                let index = t[0] as usize * (p.nb + 1) + t[1] as usize;
                Ok(StateVector::fock(dim, index)?)
            }
            (InitialStateCfg::UniformIsland, _) => Ok(StateVector::uniform(dim)?),
            (InitialStateCfg::File(path), _) => load_state_csv(path, dim),
        }
    }
}

/// Amplitudes from a two-column CSV (`re,im` per line, no header).
fn load_state_csv(path: &std::path::Path, dim: usize) -> Result<StateVector> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading state file {}", path.display()))?;
    let mut amps = Vec::with_capacity(dim);
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let re: f64 = parts
            .next()
            .ok_or_else(|| anyhow!("state file line {}: missing re", lineno + 1))?
            .trim()
            .parse()
            .with_context(|| format!("state file line {}", lineno + 1))?;
        let im: f64 = parts
            .next()
            .ok_or_else(|| anyhow!("state file line {}: missing im", lineno + 1))?
            .trim()
            .parse()
            .with_context(|| format!("state file line {}", lineno + 1))?;
        amps.push(C64::new(re, im));
    }
    if amps.len() != dim {
        bail!(
            "state file {}: {} amplitudes, basis dimension is {dim}",
            path.display(),
            amps.len()
        );
    }
    Ok(StateVector::new(amps)?)
}
