use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "tfe",
    version,
    about = "Direction fields, conformal foliations, and harmonic morphisms from twistor surfaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Solve the fiber field over a grid and write mu.csv
    Solve(RunArgs),
    /// Trace foliation leaves from seed points and write leaves.csv and leaves.svg
    Trace(RunArgs),
    /// Evaluate equation residuals with step halving and write report.csv
    Verify(RunArgs),
    /// List built-in surfaces and control fields
    ListExamples,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Built-in surface or control field name (see list-examples)
    #[arg(long)]
    pub surface: Option<String>,

    /// JSON surface file: {"degree": d, "terms": [{"exp": [e0,e1,e2,e3], "re": r, "im": i}, ...]}
    #[arg(long, conflicts_with = "surface")]
    pub surface_file: Option<PathBuf>,

    /// Slice time
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub t: f64,

    /// First component of the base point, as "re,im"
    #[arg(long, allow_hyphen_values = true)]
    pub a0: Option<String>,

    /// Full base point, as eight reals "re0,im0,re1,im1,re2,im2,re3,im3"
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,

    /// Grid as "min:max:step", either one triple for all axes or three
    /// comma-separated triples
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,

    /// Seed point "x1,x2,x3" (repeatable)
    #[arg(long, allow_hyphen_values = true)]
    pub seed: Vec<String>,

    /// Fiber branch, "+" or "-"
    #[arg(long, allow_hyphen_values = true)]
    pub branch: Option<String>,

    /// Comma-separated residual checks: ER, EM, CONF, HC0, LAPLACE, WAVE,
    /// HWC_EUCL, HWC_MINK, HYP, ORTHOG (or individual ER1, EM2, ...)
    #[arg(long)]
    pub checks: Option<String>,

    /// Residual tolerance applied to every requested check
    #[arg(long)]
    pub tol: Option<f64>,

    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}
