//! Controllers selectable by name.

use lfcbench_core::dynamics::{ModelVariant, NetworkState, TurbineParams};
use lfcbench_core::model::NetworkParams;
use lfcbench_core::mpc::{
    CentralizedMpc, ControlOutput, Controller, DecentralizedMpc, MpcConfig, MpcError, ZeroController,
};
use lfcbench_core::signals::StepSignals;
use lfcbench_core::topology::Topology;
use rayon::prelude::*;
use thiserror::Error;

/// Everything a controller may be built from.
pub struct BuildContext<'a> {
    pub variant: ModelVariant,
    pub topology: &'a Topology,
    pub params: &'a NetworkParams,
    pub turbine: &'a TurbineParams,
    pub mpc: MpcConfig,
    /// Worker threads, 0 for one per core.
    pub threads: usize,
}

type Builder = fn(&BuildContext<'_>) -> Result<Box<dyn Controller>, RegistryError>;

pub struct ControllerEntry {
    pub name: &'static str,
    pub summary: &'static str,
    /// Plant variants the controller can drive.
    pub variants: &'static [ModelVariant],
    build: Builder,
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("unknown controller `{name}`; registered controllers: {}", .known.join(", "))]
    Unknown { name: String, known: Vec<&'static str> },
    #[error("controller `{controller}` cannot drive the {} plant (supported: {})", .variant.name(), .supported.join(", "))]
    Incompatible {
        controller: &'static str,
        variant: ModelVariant,
        supported: Vec<&'static str>,
    },
    #[error("cannot build controller `{controller}`: {source}")]
    Build { controller: &'static str, source: MpcError },
    #[error("cannot start worker threads: {0}")]
    Threads(String),
}

const ALL: &[ModelVariant] = &ModelVariant::ALL;
const LOCAL: &[ModelVariant] = &[ModelVariant::Linear, ModelVariant::PwaEss, ModelVariant::Turbine];

pub const CONTROLLERS: &[ControllerEntry] = &[
    ControllerEntry {
        name: "centralized",
        summary: "one network-wide MPC problem per step",
        variants: ALL,
        build: |ctx| {
            let c =
                CentralizedMpc::new(ctx.variant, ctx.topology, ctx.params, ctx.turbine, ctx.mpc).map_err(|source| {
                    RegistryError::Build {
                        controller: "centralized",
                        source,
                    }
                })?;
            Ok(Box::new(c))
        },
    },
    ControllerEntry {
        name: "decentralized",
        summary: "independent per-area MPC problems with frozen tie power, solved in parallel",
        variants: LOCAL,
        build: |ctx| Ok(Box::new(ParallelDecentralized::new(ctx)?)),
    },
    ControllerEntry {
        name: "zero",
        summary: "applies no control action",
        variants: ALL,
        build: |_| Ok(Box::new(ZeroController::default())),
    },
];

pub fn names() -> Vec<&'static str> {
    CONTROLLERS.iter().map(|c| c.name).collect()
}

pub fn lookup(name: &str) -> Result<&'static ControllerEntry, RegistryError> {
    CONTROLLERS
        .iter()
        .find(|c| c.name == name)
        .ok_or_else(|| RegistryError::Unknown {
            name: name.to_string(),
            known: names(),
        })
}

/// Looks the controller up, checks the plant variant and builds it.
pub fn build(name: &str, ctx: &BuildContext<'_>) -> Result<Box<dyn Controller>, RegistryError> {
    let entry = lookup(name)?;
    if !entry.variants.contains(&ctx.variant) {
        return Err(RegistryError::Incompatible {
            controller: entry.name,
            variant: ctx.variant,
            supported: entry.variants.iter().map(|v| v.name()).collect(),
        });
    }
    (entry.build)(ctx)
}

/// Decentralized MPC whose local problems run on a rayon pool. Results are
/// gathered in area order, so the output does not depend on scheduling.
pub struct ParallelDecentralized {
    inner: DecentralizedMpc,
    pool: rayon::ThreadPool,
}

impl ParallelDecentralized {
    pub fn new(ctx: &BuildContext<'_>) -> Result<Self, RegistryError> {
        let inner =
            DecentralizedMpc::new(ctx.variant, ctx.topology, ctx.params, ctx.turbine, ctx.mpc).map_err(|source| {
                RegistryError::Build {
                    controller: "decentralized",
                    source,
                }
            })?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(ctx.threads)
            .build()
            .map_err(|e| RegistryError::Threads(e.to_string()))?;
        Ok(ParallelDecentralized { inner, pool })
    }
}

impl Controller for ParallelDecentralized {
    fn name(&self) -> &str {
        "decentralized"
    }

    fn supports(&self, plant: ModelVariant) -> bool {
        self.inner.supports(plant)
    }

    fn observe(&mut self, k: usize, state: &NetworkState, signals: &StepSignals) -> Result<ControlOutput, MpcError> {
        let tasks = self.inner.prepare(k, state, signals)?;
        let locals = self.inner.locals_mut();
        let results = self.pool.install(|| {
            locals
                .par_iter_mut()
                .zip(tasks.par_iter())
                .map(|(local, task)| local.solve(task))
                .collect::<Result<Vec<_>, _>>()
        })?;
        Ok(self.inner.gather(results))
    }
}
