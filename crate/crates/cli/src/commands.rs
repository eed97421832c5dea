use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fslm::basis::{smooth_curves, BasisSpec};
use fslm::io::{self, fmt_f64, Truth, CURVES_FILE, RESPONSE_FILE, TRUTH_FILE, WEIGHTS_FILE};
use fslm::report::FitReport;
use fslm::rng::derive_seed;
use fslm::simgen::{simulate_raw_covariates, simulate_response, true_gamma, SimulationSpec};
use fslm::spatial::{grid_contiguity, morans_i, row_standardize, weights_from_edges, Contiguity, SpatialWeights};
use fslm::{fit_ml, run_mwg, summarize, FslmData, MhConfig, PriorSpec, ProposalKernel};
use rayon::prelude::*;

use crate::args::{
    parse_grid, ContiguityArg, FileConfig, FitArgs, KernelArg, LatticeArgs, Method, MoranArgs, SamplerArgs,
    SimulateArgs, Table1Args,
};
use crate::svg::trace_chart;
use crate::CliError;

const ML_INTERVAL: (f64, f64) = (0.0, 0.999);
const SPLINE_ORDER: usize = 4;

fn contiguity(arg: ContiguityArg) -> Contiguity {
    match arg {
        ContiguityArg::Rook => Contiguity::Rook,
        ContiguityArg::Queen => Contiguity::Queen,
    }
}

/// Lattice or edge-list weights, row-standardized. Returns the lattice shape
/// recorded in the simulation spec (`1 × n` for an edge list).
fn resolve_weights(args: &LatticeArgs, cfg: &FileConfig) -> Result<((usize, usize), SpatialWeights), CliError> {
    if let Some(path) = args.edges.as_ref().or(cfg.edges.as_ref()) {
        let edges = io::read_edges(path)?;
        let n = edges.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0);
        if n == 0 {
            return Err(CliError::Usage(format!("{} has no edges", path.display())));
        }
        let w = row_standardize(&weights_from_edges(n, &edges)?);
        return Ok(((1, n), w));
    }
    let grid = args.grid.as_deref().or(cfg.grid.as_deref()).unwrap_or("11x11");
    let (r, c) = parse_grid(grid)?;
    let scheme = contiguity(args.contiguity.or(cfg.contiguity).unwrap_or(ContiguityArg::Rook));
    Ok(((r, c), row_standardize(&grid_contiguity(r, c, scheme)?)))
}

struct SamplerSettings {
    n_iter: usize,
    burn_in: usize,
    tuning_c: f64,
    adapt: bool,
    basis_count: usize,
}

impl SamplerSettings {
    fn resolve(args: &SamplerArgs, cfg: &FileConfig) -> Self {
        let defaults = MhConfig::default();
        Self {
            n_iter: args.n_iter.or(cfg.n_iter).unwrap_or(defaults.n_iter),
            burn_in: args.burn_in.or(cfg.burn_in).unwrap_or(defaults.burn_in),
            tuning_c: args.tuning_c.or(cfg.tuning_c).unwrap_or(defaults.tuning_c),
            adapt: args.adapt_flag().or(cfg.adapt).unwrap_or(defaults.adapt),
            basis_count: args.basis_count.or(cfg.basis_count).unwrap_or(7),
        }
    }

    fn mh_config(&self, kernel: ProposalKernel, seed: u64) -> MhConfig {
        MhConfig {
            n_iter: self.n_iter,
            burn_in: self.burn_in,
            tuning_c: self.tuning_c,
            kernel,
            adapt: self.adapt,
            seed,
            ..MhConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Estimator {
    Bayes(ProposalKernel),
    Ml,
}

impl Estimator {
    fn name(self) -> &'static str {
        match self {
            Estimator::Bayes(ProposalKernel::Normal) => "normal-kernel",
            Estimator::Bayes(ProposalKernel::Uniform) => "uniform-kernel",
            Estimator::Ml => "ml",
        }
    }
}

const ALL_ESTIMATORS: [Estimator; 3] = [
    Estimator::Bayes(ProposalKernel::Uniform),
    Estimator::Bayes(ProposalKernel::Normal),
    Estimator::Ml,
];

fn estimators(method: Method) -> Vec<Estimator> {
    match method {
        Method::NormalKernel => vec![Estimator::Bayes(ProposalKernel::Normal)],
        Method::UniformKernel => vec![Estimator::Bayes(ProposalKernel::Uniform)],
        Method::Ml => vec![Estimator::Ml],
        Method::All => ALL_ESTIMATORS.to_vec(),
    }
}

struct FitOutcome {
    report: FitReport,
    chain: Option<fslm::Chain>,
}

fn run_estimator(
    est: Estimator,
    data: &FslmData,
    settings: &SamplerSettings,
    seed: u64,
) -> Result<FitOutcome, CliError> {
    match est {
        Estimator::Bayes(kernel) => {
            let config = settings.mh_config(kernel, seed);
            config.validate()?;
            let prior = PriorSpec::diffuse(data.k());
            let chain = run_mwg(data, &prior, &config)?;
            let summary = summarize(&chain, config.burn_in, data)?;
            let report = FitReport::bayes(est.name(), data.n(), &summary, &chain);
            Ok(FitOutcome {
                report,
                chain: Some(chain),
            })
        }
        Estimator::Ml => {
            let fit = fit_ml(data, ML_INTERVAL)?;
            Ok(FitOutcome {
                report: FitReport::ml(data.n(), &fit),
                chain: None,
            })
        }
    }
}

pub fn simulate(args: SimulateArgs) -> Result<String, CliError> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let (lattice, w) = resolve_weights(&args.lattice, &cfg)?;
    let spec = SimulationSpec {
        lattice,
        contiguity: contiguity(
            args.lattice
                .contiguity
                .or(cfg.contiguity)
                .unwrap_or(ContiguityArg::Rook),
        ),
        noise_sd: args.noise_sd.or(cfg.noise_sd).unwrap_or(1.0),
        rho_true: args.rho.or(cfg.rho).unwrap_or(0.5),
        sigma2_true: args.sigma2.or(cfg.sigma2).unwrap_or(1.0),
        n_basis: args.basis_count.or(cfg.basis_count).unwrap_or(7),
        order: SPLINE_ORDER,
        seed: args.common.seed.or(cfg.seed).unwrap_or(0),
        ..SimulationSpec::default()
    };
    let out = args.out.or(cfg.out).unwrap_or_else(|| PathBuf::from("fslm-data"));
    spec.validate()?;

    let basis = spec.basis()?;
    let raw = simulate_raw_covariates(&spec)?;
    let sample = smooth_curves(&spec.grid_t, &raw, &basis)?;
    let ds = simulate_response(&sample, &w, true_gamma, spec.rho_true, spec.sigma2_true, spec.seed)?;

    io::write_curves(&out.join(CURVES_FILE), &spec.grid_t, &raw)?;
    io::write_response(&out.join(RESPONSE_FILE), ds.data.y())?;
    io::write_weights(&out.join(WEIGHTS_FILE), &w)?;
    io::write_json(&out.join(TRUTH_FILE), &Truth::new(&spec, basis.config(), &ds))?;

    let mut s = String::new();
    writeln!(s, "n\t{}", ds.data.n()).unwrap();
    writeln!(s, "k\t{}", ds.data.k()).unwrap();
    for (j, b) in ds.true_theta.beta.iter().enumerate() {
        writeln!(s, "beta_{}\t{}", j + 1, fmt_f64(*b)).unwrap();
    }
    writeln!(s, "sigma2\t{}", fmt_f64(ds.true_theta.sigma2)).unwrap();
    writeln!(s, "rho\t{}", fmt_f64(ds.true_theta.rho)).unwrap();
    writeln!(s, "seed\t{}", spec.seed).unwrap();
    Ok(s)
}

fn load_bundle(dir: &Path, basis_count: usize) -> Result<FslmData, CliError> {
    let (t_grid, raw) = io::read_curves(&dir.join(CURVES_FILE))?;
    let y = io::read_response(&dir.join(RESPONSE_FILE))?;
    if y.len() != raw.nrows() {
        return Err(CliError::Usage(format!(
            "{} curves but {} responses in {}",
            raw.nrows(),
            y.len(),
            dir.display()
        )));
    }
    let w = io::read_weights(&dir.join(WEIGHTS_FILE), y.len())?;
    let t0 = t_grid.first().copied().unwrap_or(0.0);
    let t1 = t_grid.last().copied().unwrap_or(0.0);
    let basis = BasisSpec::new(t0, t1, basis_count, SPLINE_ORDER)?;
    let sample = smooth_curves(&t_grid, &raw, &basis)?;
    Ok(FslmData::new(y, sample.scores().clone(), w)?)
}

fn report_lines(s: &mut String, report: &FitReport) {
    writeln!(s, "[{}]", report.method).unwrap();
    for p in &report.parameters {
        let std = p.std.map(fmt_f64).unwrap_or_else(|| "NA".into());
        writeln!(s, "{}\t{}\t{}", p.name, fmt_f64(p.estimate), std).unwrap();
    }
    writeln!(s, "log_likelihood\t{}", fmt_f64(report.log_likelihood)).unwrap();
    writeln!(s, "bic\t{}", fmt_f64(report.bic)).unwrap();
    if let Some(ar) = report.acceptance_rate {
        writeln!(s, "acceptance_rate\t{}", fmt_f64(ar)).unwrap();
    }
}

pub fn fit(args: FitArgs) -> Result<String, CliError> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let settings = SamplerSettings::resolve(&args.sampler, &cfg);
    let input = args
        .input
        .or(cfg.input.clone())
        .ok_or_else(|| CliError::Usage("fit needs --input <bundle dir>".into()))?;
    let out = args.out.or(cfg.out.clone()).unwrap_or_else(|| input.clone());
    let kernel_method = args.kernel.or(cfg.kernel).map(|k| match k {
        KernelArg::Normal => Method::NormalKernel,
        KernelArg::Uniform => Method::UniformKernel,
    });
    let method = args
        .method
        .or(cfg.method)
        .or(kernel_method)
        .unwrap_or(Method::NormalKernel);
    let seed = args.common.seed.or(cfg.seed).unwrap_or(0);
    let svg = args.svg || cfg.svg.unwrap_or(false);

    let data = load_bundle(&input, settings.basis_count)?;
    let mut s = String::new();
    for est in estimators(method) {
        let outcome = run_estimator(est, &data, &settings, seed)?;
        let name = est.name();
        io::write_json(&out.join(format!("report_{name}.json")), &outcome.report)?;
        if let Some(chain) = &outcome.chain {
            io::write_chain(&out.join(format!("trace_{name}.csv")), chain)?;
            if svg {
                let chart = trace_chart(&[("rho", &chain.draws_rho), ("sigma2", &chain.draws_sigma2)]);
                io::write_atomic(&out.join(format!("trace_{name}.svg")), chart.as_bytes())?;
            }
        }
        report_lines(&mut s, &outcome.report);
    }
    Ok(s)
}

pub fn table1(args: Table1Args) -> Result<String, CliError> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let settings = SamplerSettings::resolve(&args.sampler, &cfg);
    let rho_list = args
        .rho_list
        .or(cfg.rho_list.clone())
        .unwrap_or_else(|| vec![0.3, 0.5, 0.7]);
    if rho_list.is_empty() {
        return Err(CliError::Usage("--rho-list must name at least one value".into()));
    }
    let replicates = args.replicates.or(cfg.replicates).unwrap_or(1);
    if replicates == 0 {
        return Err(CliError::Usage("--replicates must be at least 1".into()));
    }
    let seed = args.common.seed.or(cfg.seed).unwrap_or(0);
    let out = args
        .out
        .or(cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("fslm-table1"));
    let (lattice, w) = resolve_weights(&args.lattice, &cfg)?;
    let base = SimulationSpec {
        lattice,
        noise_sd: args.noise_sd.or(cfg.noise_sd).unwrap_or(1.0),
        sigma2_true: args.sigma2.or(cfg.sigma2).unwrap_or(1.0),
        n_basis: settings.basis_count,
        order: SPLINE_ORDER,
        ..SimulationSpec::default()
    };
    for &rho in &rho_list {
        SimulationSpec {
            rho_true: rho,
            ..base.clone()
        }
        .validate()?;
    }
    settings.mh_config(ProposalKernel::Normal, 0).validate()?;

    let tasks: Vec<(usize, usize)> = (0..rho_list.len())
        .flat_map(|i| (0..replicates).map(move |r| (i, r)))
        .collect();
    // one row of estimates (β…, σ², ρ, BIC) per estimator
    let results: Vec<Vec<Vec<f64>>> = tasks
        .par_iter()
        .map(|&(i, r)| {
            let spec = SimulationSpec {
                rho_true: rho_list[i],
                seed: derive_seed(seed, r as u64),
                ..base.clone()
            };
            let basis = spec.basis()?;
            let raw = simulate_raw_covariates(&spec)?;
            let sample = smooth_curves(&spec.grid_t, &raw, &basis)?;
            let ds = simulate_response(&sample, &w, true_gamma, spec.rho_true, spec.sigma2_true, spec.seed)?;
            ALL_ESTIMATORS
                .iter()
                .map(|&est| {
                    let report = run_estimator(est, &ds.data, &settings, spec.seed)?.report;
                    let mut row = report.estimates();
                    row.push(report.bic);
                    Ok(row)
                })
                .collect()
        })
        .collect::<Result<_, CliError>>()?;

    let k = settings.basis_count;
    let mut columns: Vec<String> = (1..=k).map(|j| format!("beta_{j}")).collect();
    columns.extend(["sigma2", "rho", "bic"].map(String::from));
    let mut header = vec!["method".to_string(), "rho_true".to_string(), "replicates".to_string()];
    header.extend(columns.iter().cloned());
    if replicates > 1 {
        header.extend(columns.iter().map(|c| format!("{c}_mc_sd")));
    }
    let mut csv = header.join(",");
    csv.push('\n');
    for (i, &rho) in rho_list.iter().enumerate() {
        for (m, est) in ALL_ESTIMATORS.iter().enumerate() {
            let rows: Vec<&Vec<f64>> = tasks
                .iter()
                .zip(&results)
                .filter(|((ti, _), _)| *ti == i)
                .map(|(_, res)| &res[m])
                .collect();
            let mut fields = vec![est.name().to_string(), fmt_f64(rho), replicates.to_string()];
            let ncol = columns.len();
            let means: Vec<f64> = (0..ncol)
                .map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / rows.len() as f64)
                .collect();
            fields.extend(means.iter().map(|&v| fmt_f64(v)));
            if replicates > 1 {
                for c in 0..ncol {
                    let ss: f64 = rows.iter().map(|r| (r[c] - means[c]).powi(2)).sum();
                    fields.push(fmt_f64((ss / (rows.len() - 1) as f64).sqrt()));
                }
            }
            csv.push_str(&fields.join(","));
            csv.push('\n');
        }
    }
    io::write_atomic(&out.join("table1.csv"), csv.as_bytes())?;
    Ok(csv)
}

pub fn moran(args: MoranArgs) -> Result<String, CliError> {
    let cfg = FileConfig::load(args.common.config.as_deref())?;
    let input = args.input.or(cfg.input.clone());
    let response = args
        .response
        .or_else(|| input.as_ref().map(|d| d.join(RESPONSE_FILE)))
        .ok_or_else(|| CliError::Usage("moran needs --response or --input".into()))?;
    let y = io::read_response(&response)?;
    let n = y.len();
    let lattice_given = args.lattice.edges.is_some() || args.lattice.grid.is_some();
    let w = match (&args.weights, &input) {
        (Some(path), _) => io::read_weights(path, n)?,
        (None, Some(dir)) if !lattice_given => io::read_weights(&dir.join(WEIGHTS_FILE), n)?,
        _ => {
            if !lattice_given && cfg.edges.is_none() && cfg.grid.is_none() {
                return Err(CliError::Usage(
                    "moran needs --weights, --edges, --grid or --input".into(),
                ));
            }
            resolve_weights(&args.lattice, &cfg)?.1
        }
    };
    if w.n() != n {
        return Err(CliError::Usage(format!("{n} responses for {} spatial units", w.n())));
    }
    let permutations = args.permutations.or(cfg.permutations).unwrap_or(999);
    let seed = args.common.seed.or(cfg.seed).unwrap_or(0);
    let values: Vec<f64> = y.iter().copied().collect();
    let result = morans_i(&values, &w, permutations, seed)?;
    let mut s = String::new();
    writeln!(s, "statistic\t{}", fmt_f64(result.statistic)).unwrap();
    writeln!(s, "expected\t{}", fmt_f64(result.expected)).unwrap();
    writeln!(s, "p_value\t{}", fmt_f64(result.p_value)).unwrap();
    writeln!(s, "permutations\t{}", result.n_permutations).unwrap();
    Ok(s)
}
