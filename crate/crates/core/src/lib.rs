//! Directional volatility spillover networks from paired time series.
//!
//! The pipeline loads a dated panel, fits a bivariate VAR(1)-BEKK(1,1)
//! model for every pair of nodes, turns significant spillover coefficients
//! into a weighted directed network, and summarises it with topology
//! metrics, local diffusion indices and a CONCOR block model.

pub use nalgebra;

pub mod bekk;
pub mod blockmodel;
pub mod diagnostics;
pub mod diffusion;
pub mod network;
pub mod optim;
pub mod panel;
pub mod pipeline;
pub mod simulate;
pub mod stats;

pub use bekk::{fit_bekk, BekkError, BekkFit, BekkParams, Direction, FitOptions, WaldResult};
pub use panel::{load_panel, GapFill, PanelError, PanelSchema, PeriodSpec, SeriesPanel};
pub use simulate::{simulate_bekk, simulate_panel, PanelSimSpec, PlantedEdge, SimError, SimSpec};
pub use blockmodel::{block_model, BlockPartition, BlockRole};
pub use diffusion::{pattern_shift, resilience, CumulativeCurve, DiffusionProfile, FlowDirection};
pub use network::{build_network, NetworkTopology, SpilloverNetwork, SpilloverTest, TestStatus};
pub use pipeline::{analyze, run_pipeline, write_report, PipelineError, RunConfig, RunReport, Target};
