use std::path::Path;

use dppchains::chain::check_no_return;
use dppchains::kernel::{build_kernel_with, l_ensemble_with_threshold, DEFAULT_GAP_THRESHOLD};
use dppchains::linalg::det;
use dppchains::renewal::RateFit;
use dppchains::sampler::{count_trajectories, sample_batch};
use dppchains::stats::CountStatistics;
use dppchains::{
    apply_bernoulli_noise, clt_report, compute_hit_matrix, correlation, count_distribution, count_moments,
    entrance_law, enumerate_trajectories, first_passage_distribution, gap_probability, l_ensemble_closed_form,
    product_correlation, renewal_function, renewal_rate_fit, Error, Kernel, LoopFreeChain, NoiseParams,
};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::input::{self, chain_of, resolve_window, site_values, Document, Input};
use crate::output::{scalar, Report, Table};
use crate::{Command, Failure};

pub struct Context {
    pub seed: u64,
    pub seed_given: bool,
    pub strict: bool,
    pub tol: Option<f64>,
}

impl Context {
    fn tol(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    fn require_seed(&self) -> Result<(), Failure> {
        if self.strict && !self.seed_given {
            return Err(Failure::malformed("--strict requires an explicit --seed for randomized commands"));
        }
        Ok(())
    }
}

fn labels(chain: &LoopFreeChain, xs: &[usize]) -> Vec<String> {
    xs.iter().map(|&x| chain.label(x).to_string()).collect()
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn matrix_table(states: &[String], m: &DMatrix<f64>) -> Table {
    let mut columns = vec!["state"];
    columns.extend(states.iter().map(String::as_str));
    let mut t = Table::new(&columns);
    for (i, s) in states.iter().enumerate() {
        let mut row = vec![s.clone()];
        row.extend(m.row(i).iter().map(|v| scalar(&json!(v))));
        t.push(row);
    }
    t
}

fn kernel_report(k: &Kernel) -> Report {
    let states: Vec<String> = k.states().iter().map(|s| s.to_string()).collect();
    Report::new(&k.to_file()).with_table(matrix_table(&states, k.matrix()))
}

fn optional_noise(p: &Option<String>, q: &Option<String>, n: usize) -> Result<Option<NoiseParams>, Failure> {
    if p.is_none() && q.is_none() {
        return Ok(None);
    }
    let p = site_values(p.as_deref().unwrap_or("0"), n, "p")?;
    let q = site_values(q.as_deref().unwrap_or("0"), n, "q")?;
    Ok(Some(NoiseParams::new(p, q)?))
}

fn series_table(name: &str, value: &str, start: usize, vals: &[f64]) -> Table {
    let mut t = Table::new(&[name, value]);
    for (i, v) in vals.iter().enumerate() {
        t.push(vec![(start + i).to_string(), scalar(&json!(v))]);
    }
    t
}

pub fn run(cmd: &Command, input: &Input, ctx: &Context) -> Result<Report, Failure> {
    let doc = &input.doc;
    match cmd {
        Command::Validate { .. } => {
            let chain = chain_of(doc)?;
            let transitions: usize = (0..chain.len()).map(|x| chain.successors(x).len()).sum();
            Ok(Report::new(&json!({
                "input_kind": doc.kind(),
                "states": chain.len(),
                "transitions": transitions,
                "topological_order": labels(&chain, chain.topological_order()),
                "miss_probability": chain.miss_probability(),
            })))
        }
        Command::Kernel { .. } => {
            let chain = chain_of(doc)?;
            Ok(kernel_report(&dppchains::build_kernel(&chain)))
        }
        Command::Correlate { set, kernel, .. } => {
            let chain = chain_of(doc)?;
            let q = compute_hit_matrix(&chain);
            let w = resolve_window(&chain, set)?;
            let (k, source) = match kernel {
                Some(path) => (imported_kernel(path, &chain)?, "kernel_file"),
                None => (build_kernel_with(&chain, &q), "chain"),
            };
            let minor = correlation(&k, &w)?;
            let product = product_correlation(&chain, &q, &w)?;
            let discrepancy = (minor - product).abs();
            Ok(Report::new(&json!({
                "set": labels(&chain, &w),
                "kernel_source": source,
                "minor": minor,
                "product": product,
                "discrepancy": discrepancy,
            }))
            .check("minor vs ordered product", discrepancy, ctx.tol(1e-10)))
        }
        Command::Gap { window, .. } => {
            let chain = chain_of(doc)?;
            let q = compute_hit_matrix(&chain);
            let w = resolve_window(&chain, window)?;
            let k = build_kernel_with(&chain, &q);
            let gap = gap_probability(&k, &w)?;
            let law = entrance_law(&chain, &q, &w)?;
            let discrepancy = (gap - law.pi_zero).abs();
            let entrance: Vec<Value> = law
                .window
                .iter()
                .zip(&law.pi_tilde)
                .map(|(&y, p)| json!({ "state": chain.label(y).to_string(), "probability": p }))
                .collect();
            Ok(Report::new(&json!({
                "window": labels(&chain, &law.window),
                "gap": gap,
                "pi_zero": law.pi_zero,
                "discrepancy": discrepancy,
                "entrance_law": entrance,
            }))
            .check("det(I - K_Y) vs miss probability", discrepancy, ctx.tol(1e-10)))
        }
        Command::Lensemble { window, .. } => {
            let chain = chain_of(doc)?;
            let q = compute_hit_matrix(&chain);
            let w = resolve_window(&chain, window)?;
            check_no_return(&chain, &q, &w)?;
            let k = build_kernel_with(&chain, &q);
            let l = l_ensemble_with_threshold(&k, &w, DEFAULT_GAP_THRESHOLD)?;
            let closed = l_ensemble_closed_form(&chain, &q, &w)?;
            let pi_zero = entrance_law(&chain, &q, &w)?.pi_zero;
            let m = l.dim();
            let discrepancy = (l.matrix() - closed.matrix()).amax();
            let fredholm = det(&(DMatrix::identity(m, m) + l.matrix())) * pi_zero;
            let tol = ctx.tol(1e-9);
            let states: Vec<String> = l.states().iter().map(|s| s.to_string()).collect();
            Ok(Report::new(&json!({
                "window": states,
                "pi_zero": pi_zero,
                "l_inverse_route": matrix_rows(l.matrix()),
                "l_closed_form": matrix_rows(closed.matrix()),
                "max_discrepancy": discrepancy,
                "det_i_plus_l_times_pi_zero": fredholm,
            }))
            .with_table(matrix_table(&states, l.matrix()))
            .check("inverse route vs closed form", discrepancy, tol)
            .check("det(I + L) * pi_zero vs 1", (fredholm - 1.0).abs(), tol))
        }
        Command::Noise { p, q, .. } => {
            let chain = chain_of(doc)?;
            let noise = optional_noise(&Some(p.clone()), &Some(q.clone()), chain.len())?.expect("noise given");
            let k = apply_bernoulli_noise(&dppchains::build_kernel(&chain), &noise)?;
            Ok(kernel_report(&k))
        }
        Command::Sample { samples, p, q, .. } => {
            ctx.require_seed()?;
            let chain = chain_of(doc)?;
            let noise = optional_noise(p, q, chain.len())?;
            let batch = sample_batch(&chain, noise.as_ref(), *samples, ctx.seed)?;
            let mut t = Table::new(&["replicate", "states"]);
            for (i, c) in batch.configs.iter().enumerate() {
                t.push(vec![i.to_string(), labels(&chain, c.states()).join(";")]);
            }
            let mut report = Report::new(&json!({ "samples": samples })).with_table(t);
            report.raw = Some(batch.to_json_lines(&chain));
            Ok(report)
        }
        Command::Enumerate { .. } => {
            let chain = chain_of(doc)?;
            let dist = enumerate_trajectories(&chain)?;
            let total: f64 = dist.iter().map(|(_, p)| p).sum();
            let mut t = Table::new(&["states", "probability"]);
            let configs: Vec<Value> = dist
                .iter()
                .map(|(c, p)| {
                    let ls = labels(&chain, c.states());
                    t.push(vec![ls.join(";"), scalar(&json!(p))]);
                    json!({ "states": ls, "probability": p })
                })
                .collect();
            Ok(Report::new(&json!({
                "paths": count_trajectories(&chain),
                "total": total,
                "configurations": configs,
            }))
            .with_table(t))
        }
        Command::Renewal { .. } => match doc {
            Document::Renewal(spec) => Ok(Report::new(&dppchains::renewal_chain(spec)?.to_spec())),
            other => Err(Failure::malformed(format!("expected a renewal spec, got a {} document", other.kind()))),
        },
        Command::Semimarkov { .. } => match doc {
            Document::SemiMarkov(spec) => Ok(Report::new(&dppchains::semi_markov_chain(spec)?.to_spec())),
            other => Err(Failure::malformed(format!("expected a semi-Markov spec, got a {} document", other.kind()))),
        },
        Command::Renewalfn { nmax, .. } => {
            let Document::Renewal(spec) = doc else {
                return Err(Failure::malformed(format!("expected a renewal spec, got a {} document", doc.kind())));
            };
            let n_max = nmax.unwrap_or(spec.horizon);
            let f = renewal_function(&spec.xi1, n_max)?;
            let fit = renewal_rate_fit(&spec.xi1, &f)?;
            let decay = match &fit {
                RateFit::Converged => None,
                RateFit::Exponential { decay_rate, .. } => Some(*decay_rate),
            };
            Ok(Report::new(&json!({
                "n_max": n_max,
                "limit": 1.0 / spec.xi1.mean(),
                "decay_rate": decay,
                "fit": fit,
                "f": f,
            }))
            .with_table(series_table("n", "f", 1, &f)))
        }
        Command::Firstpassage { from, to, tmax, .. } => {
            let Document::SemiMarkov(spec) = doc else {
                return Err(Failure::malformed(format!("expected a semi-Markov spec, got a {} document", doc.kind())));
            };
            let find = |name: &str| {
                spec.states()
                    .iter()
                    .position(|s| s.to_string() == name.trim())
                    .ok_or_else(|| Failure::from(Error::UnknownState(name.to_owned())))
            };
            let (a, b) = (find(from)?, find(to)?);
            let t_max = tmax.unwrap_or(spec.horizon());
            let pmf = first_passage_distribution(spec, a, b, t_max)?;
            Ok(Report::new(&json!({
                "from": from,
                "to": to,
                "t_max": t_max,
                "mass": pmf.mass(),
                "pmf": pmf,
            }))
            .with_table(series_table("t", "probability", pmf.offset, &pmf.probs)))
        }
        Command::Moments { window, p, q, .. } => {
            let chain = chain_of(doc)?;
            let w = resolve_window(&chain, window)?;
            let mut k = dppchains::build_kernel(&chain);
            if let Some(noise) = optional_noise(p, q, chain.len())? {
                k = apply_bernoulli_noise(&k, &noise)?;
            }
            let (mean, variance) = count_moments(&k, &w)?;
            Ok(Report::new(&json!({
                "window_size": w.len(),
                "mean": mean,
                "variance": variance,
            })))
        }
        Command::Distribution { window, .. } => {
            let chain = chain_of(doc)?;
            let w = resolve_window(&chain, window)?;
            let k = dppchains::build_kernel(&chain);
            let pmf = count_distribution(&k, &w)?;
            let gap = gap_probability(&k, &w)?;
            let discrepancy = (pmf[0] - gap).abs();
            let stats = CountStatistics::from_distribution(pmf.clone(), dppchains::stats::CountSource::ExactKernel);
            Ok(Report::new(&json!({
                "window_size": w.len(),
                "mean": stats.mean,
                "variance": stats.variance,
                "gap": gap,
                "discrepancy": discrepancy,
                "pmf": pmf,
            }))
            .with_table(series_table("count", "probability", 0, &pmf))
            .check("P(N = 0) vs det(I - K_Y)", discrepancy, ctx.tol(1e-10)))
        }
        Command::Clt { windows, samples, p, q, .. } => {
            ctx.require_seed()?;
            let chain = chain_of(doc)?;
            let sizes = windows
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Failure::malformed(format!("--windows: {e}")))?;
            if let Some(&big) = sizes.iter().find(|&&s| s > chain.len()) {
                return Err(Failure::malformed(format!("window size {big} exceeds the {} states", chain.len())));
            }
            let order = chain.topological_order();
            let ws: Vec<Vec<usize>> = sizes.iter().map(|&s| order[..s].to_vec()).collect();
            let noise = optional_noise(p, q, chain.len())?;
            let report = clt_report(&chain, noise.as_ref(), &ws, *samples, ctx.seed)?;
            let mut t = Table::new(&["size", "mean", "variance", "k3", "k4", "ks"]);
            for r in &report.rows {
                t.push(vec![
                    r.size.to_string(),
                    scalar(&json!(r.exact_mean)),
                    scalar(&json!(r.exact_variance)),
                    scalar(&json!(r.k3)),
                    scalar(&json!(r.k4)),
                    scalar(&json!(r.ks)),
                ]);
            }
            Ok(Report::new(&report).with_table(t))
        }
    }
}

fn imported_kernel(path: &Path, chain: &LoopFreeChain) -> Result<Kernel, Failure> {
    let Input { doc, .. } = input::load(path)?;
    let Document::Kernel(file) = doc else {
        return Err(Failure::malformed(format!("{} is not a kernel file", path.display())));
    };
    let k = Kernel::from_file(&file)?;
    if k.states() != chain.states() {
        return Err(Failure::malformed("kernel file states do not match the chain"));
    }
    Ok(k)
}
