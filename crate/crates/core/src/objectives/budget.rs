//! Budget allocation over a channel/customer bipartite graph.
//!
//! With `c_st = -ln(1 - p_st)`, customer `t` is influenced by allocation `x`
//! with probability `1 - exp(-Σ_s c_st x_s)`. The objective sums this over
//! customers and takes an `α`-weighted sum over advertisers, each owning a
//! block of `|S|` coordinates. Products are evaluated in log space.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::Objective;
use crate::bounds::spectral_norm;
use crate::error::{check_dim, Error, Result};
use crate::geometry::Polytope;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub channel: usize,
    pub customer: usize,
    pub probability: f64,
}

/// An aggregated `(channel, customer)` pair with its observed frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrequencyEdge {
    pub channel: usize,
    pub customer: usize,
    pub frequency: f64,
}

/// Rule turning a pair frequency into an influence probability.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum FrequencyMapping {
    /// `p = 1 - exp(-freq / F_max)`.
    #[default]
    Exponential,
    /// `p = min(freq / F_max, cap)`.
    Linear { cap: f64 },
}

impl FrequencyMapping {
    pub const DEFAULT_LINEAR_CAP: f64 = 0.99;

    pub fn probability(&self, frequency: f64, max_frequency: f64) -> f64 {
        let ratio = frequency / max_frequency;
        match *self {
            FrequencyMapping::Exponential => -(-ratio).exp_m1(),
            FrequencyMapping::Linear { cap } => ratio.min(cap),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BudgetOptions {
    pub advertisers: usize,
    /// Advertiser weights; `None` means `1/k` each.
    pub alphas: Option<Vec<f64>>,
    /// Per-channel budget limit shared by all advertisers; `None` maps the
    /// mean edge frequency through the frequency rule.
    pub upper: Option<f64>,
}

impl Default for BudgetOptions {
    fn default() -> Self {
        Self {
            advertisers: 1,
            alphas: None,
            upper: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BudgetAllocationObjective {
    channels: usize,
    customers: usize,
    edges: Vec<Edge>,
    advertisers: usize,
    alphas: Vec<f64>,
    per_advertiser_upper: Vec<f64>,
    polytope: Polytope,
    // customer -> [(channel, c_st)]
    by_customer: Vec<Vec<(usize, f64)>>,
}

impl BudgetAllocationObjective {
    pub fn new(
        channels: usize,
        customers: usize,
        edges: Vec<Edge>,
        alphas: Vec<f64>,
        per_advertiser_upper: Vec<f64>,
    ) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::NoEdges);
        }
        if alphas.is_empty() {
            return Err(Error::invalid("at least one advertiser is required"));
        }
        if let Some(a) = alphas.iter().find(|&&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::invalid(format!("advertiser weight {a} must be positive")));
        }
        check_dim(channels, per_advertiser_upper.len())?;
        let mut by_customer = vec![Vec::new(); customers];
        for e in &edges {
            if e.channel >= channels || e.customer >= customers {
                return Err(Error::invalid(format!(
                    "edge ({}, {}) out of range",
                    e.channel, e.customer
                )));
            }
            if !(e.probability > 0.0 && e.probability < 1.0) {
                return Err(Error::invalid(format!(
                    "edge ({}, {}) has probability {} outside (0, 1)",
                    e.channel, e.customer, e.probability
                )));
            }
            by_customer[e.customer].push((e.channel, -(-e.probability).ln_1p()));
        }
        let advertisers = alphas.len();
        let upper = DVector::from_fn(advertisers * channels, |k, _| {
            per_advertiser_upper[k % channels]
        });
        let polytope = Polytope::boxed(upper)?;
        Ok(Self {
            channels,
            customers,
            edges,
            advertisers,
            alphas,
            per_advertiser_upper,
            polytope,
            by_customer,
        })
    }

    /// Builds an instance from aggregated frequencies.
    pub fn from_frequencies(
        channels: usize,
        customers: usize,
        edges: &[FrequencyEdge],
        mapping: FrequencyMapping,
        options: &BudgetOptions,
    ) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::NoEdges);
        }
        let max_frequency = edges.iter().map(|e| e.frequency).fold(0.0, f64::max);
        let mean_frequency = edges.iter().map(|e| e.frequency).sum::<f64>() / edges.len() as f64;
        let mapped = edges
            .iter()
            .map(|e| Edge {
                channel: e.channel,
                customer: e.customer,
                probability: mapping.probability(e.frequency, max_frequency),
            })
            .collect();
        let k = options.advertisers.max(1);
        let alphas = options
            .alphas
            .clone()
            .unwrap_or_else(|| vec![1.0 / k as f64; k]);
        if alphas.len() != k {
            return Err(Error::invalid(format!(
                "{} advertiser weights given for {k} advertisers",
                alphas.len()
            )));
        }
        let limit = options
            .upper
            .unwrap_or_else(|| mapping.probability(mean_frequency, max_frequency));
        Self::new(channels, customers, mapped, alphas, vec![limit; channels])
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn customers(&self) -> usize {
        self.customers
    }

    pub fn advertisers(&self) -> usize {
        self.advertisers
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn per_advertiser_upper(&self) -> &[f64] {
        &self.per_advertiser_upper
    }

    fn validate_point(&self, x: &DVector<f64>) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        if let Some(j) = x.iter().position(|&v| v < 0.0) {
            return Err(Error::invalid(format!(
                "allocation x[{j}] = {} is negative",
                x[j]
            )));
        }
        Ok(())
    }

    /// Σ_s c_st x_s for advertiser block `i` and customer `t`.
    fn exposure(&self, x: &DVector<f64>, i: usize, t: usize) -> f64 {
        let base = i * self.channels;
        self.by_customer[t]
            .iter()
            .map(|&(s, c)| c * x[base + s])
            .sum()
    }

    /// Exact second partial `∂²F / ∂x_{i,s} ∂x_{i',s'}` at `x`.
    pub fn hessian_entry(
        &self,
        x: &DVector<f64>,
        i: usize,
        s: usize,
        i2: usize,
        s2: usize,
    ) -> Result<f64> {
        self.validate_point(x)?;
        if i >= self.advertisers || i2 >= self.advertisers || s >= self.channels || s2 >= self.channels
        {
            return Err(Error::invalid(format!(
                "hessian index ({i},{s}),({i2},{s2}) out of range"
            )));
        }
        if i != i2 {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for t in 0..self.customers {
            let row = &self.by_customer[t];
            let cs: f64 = row.iter().filter(|e| e.0 == s).map(|e| e.1).sum();
            let cs2: f64 = row.iter().filter(|e| e.0 == s2).map(|e| e.1).sum();
            if cs == 0.0 || cs2 == 0.0 {
                continue;
            }
            total += cs * cs2 * (-self.exposure(x, i, t)).exp();
        }
        Ok(-self.alphas[i] * total)
    }
}

impl Objective for BudgetAllocationObjective {
    fn dim(&self) -> usize {
        self.advertisers * self.channels
    }

    fn polytope(&self) -> &Polytope {
        &self.polytope
    }

    fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.validate_point(x)?;
        let mut total = 0.0;
        for (i, alpha) in self.alphas.iter().enumerate() {
            let influenced: f64 = (0..self.customers)
                .map(|t| -(-self.exposure(x, i, t)).exp_m1())
                .sum();
            total += alpha * influenced;
        }
        Ok(total)
    }

    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.validate_point(x)?;
        let mut g = DVector::zeros(self.dim());
        for (i, alpha) in self.alphas.iter().enumerate() {
            let base = i * self.channels;
            for t in 0..self.customers {
                let decay = alpha * (-self.exposure(x, i, t)).exp();
                for &(s, c) in &self.by_customer[t] {
                    g[base + s] += c * decay;
                }
            }
        }
        Ok(g)
    }

    fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.validate_point(x)?;
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        for (i, alpha) in self.alphas.iter().enumerate() {
            let base = i * self.channels;
            for t in 0..self.customers {
                let decay = alpha * (-self.exposure(x, i, t)).exp();
                let row = &self.by_customer[t];
                for &(s, c) in row {
                    for &(s2, c2) in row {
                        h[(base + s, base + s2)] -= c * c2 * decay;
                    }
                }
            }
        }
        Ok(h)
    }

    /// The Hessian is entrywise non-positive and shrinks in magnitude as `x`
    /// grows, so its spectral norm is largest at the origin.
    fn smoothness_bound(&self) -> Result<f64> {
        spectral_norm(&self.hessian(&DVector::zeros(self.dim()))?)
    }
}

/// Parses `channel <TAB> customer <TAB> frequency` lines.
///
/// Identifiers are indexed densely in first-appearance order and duplicate
/// pairs have their frequencies summed. Blank lines and lines starting with
/// `#` are skipped. Returns `(channels, customers, edges)`.
pub fn parse_bipartite(
    text: &str,
    path: &Path,
) -> Result<(Vec<String>, Vec<String>, Vec<FrequencyEdge>)> {
    let mut channels: Vec<String> = Vec::new();
    let mut customers: Vec<String> = Vec::new();
    let mut channel_index: HashMap<String, usize> = HashMap::new();
    let mut customer_index: HashMap<String, usize> = HashMap::new();
    let mut pair_index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges: Vec<FrequencyEdge> = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg,
        };
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(format!(
                "expected 3 fields (channel, customer, frequency), found {}",
                fields.len()
            )));
        }
        let frequency: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(format!("frequency {:?} is not a number", fields[2])))?;
        if !(frequency >= 1.0 && frequency.is_finite()) {
            return Err(parse_err(format!("frequency {frequency} must be >= 1")));
        }
        let s = *channel_index.entry(fields[0].to_owned()).or_insert_with(|| {
            channels.push(fields[0].to_owned());
            channels.len() - 1
        });
        let t = *customer_index.entry(fields[1].to_owned()).or_insert_with(|| {
            customers.push(fields[1].to_owned());
            customers.len() - 1
        });
        match pair_index.get(&(s, t)) {
            Some(&k) => edges[k].frequency += frequency,
            None => {
                pair_index.insert((s, t), edges.len());
                edges.push(FrequencyEdge {
                    channel: s,
                    customer: t,
                    frequency,
                });
            }
        }
    }
    if edges.is_empty() {
        return Err(Error::NoEdges);
    }
    Ok((channels, customers, edges))
}

pub fn load_bipartite(
    path: &Path,
    mapping: FrequencyMapping,
    options: &BudgetOptions,
) -> Result<BudgetAllocationObjective> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (channels, customers, edges) = parse_bipartite(&text, path)?;
    BudgetAllocationObjective::from_frequencies(
        channels.len(),
        customers.len(),
        &edges,
        mapping,
        options,
    )
}

/// Seeded random bipartite corpus standing in for real bidding logs.
#[derive(Clone, Debug)]
pub struct SyntheticBipartite {
    pub channels: usize,
    pub customers: usize,
    /// Probability that any given (channel, customer) pair is an edge.
    pub density: f64,
    /// Edge frequencies are uniform integers in `1..=max_frequency`.
    pub max_frequency: u32,
}

pub fn synthetic_bipartite(seed: u64, spec: &SyntheticBipartite) -> Result<Vec<FrequencyEdge>> {
    if spec.channels == 0 || spec.customers == 0 {
        return Err(Error::invalid("synthetic graph needs channels and customers"));
    }
    if !(spec.density > 0.0 && spec.density <= 1.0) {
        return Err(Error::invalid("edge density must lie in (0, 1]"));
    }
    if spec.max_frequency == 0 {
        return Err(Error::invalid("max_frequency must be at least 1"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for s in 0..spec.channels {
        for t in 0..spec.customers {
            if rng.random::<f64>() < spec.density {
                let frequency = rng.random_range(1..=spec.max_frequency) as f64;
                edges.push(FrequencyEdge {
                    channel: s,
                    customer: t,
                    frequency,
                });
            }
        }
    }
    if edges.is_empty() {
        return Err(Error::NoEdges);
    }
    Ok(edges)
}

/// Writes edges in the bipartite TSV format with `k<s>` / `c<t>` identifiers.
pub fn write_bipartite_tsv(path: &Path, edges: &[FrequencyEdge]) -> Result<()> {
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    );
    for e in edges {
        writeln!(out, "k{}\tc{}\t{}", e.channel, e.customer, e.frequency)
            .map_err(|err| Error::io(path, err))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::LN_2;

    use super::*;

    fn single(upper: f64) -> BudgetAllocationObjective {
        BudgetAllocationObjective::new(
            1,
            1,
            vec![Edge {
                channel: 0,
                customer: 0,
                probability: 0.5,
            }],
            vec![1.0],
            vec![upper],
        )
        .unwrap()
    }

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn single_edge_values() {
        let f = single(2.0);
        assert_eq!(f.value(&v(&[0.0])).unwrap(), 0.0);
        assert!((f.value(&v(&[1.0])).unwrap() - 0.5).abs() < 1e-15);
        assert!((f.value(&v(&[2.0])).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn single_edge_gradient_and_hessian() {
        let f = single(2.0);
        assert!((f.gradient(&v(&[0.0])).unwrap()[0] - LN_2).abs() < 1e-15);
        assert!((f.gradient(&v(&[1.0])).unwrap()[0] - 0.5 * LN_2).abs() < 1e-15);
        let h = f.hessian_entry(&v(&[0.0]), 0, 0, 0, 0).unwrap();
        assert!((h + LN_2 * LN_2).abs() < 1e-15);
        assert_eq!(f.hessian(&v(&[0.0])).unwrap()[(0, 0)], h);
    }

    #[test]
    fn cross_advertiser_entries_vanish() {
        let f = BudgetAllocationObjective::new(
            2,
            1,
            vec![
                Edge {
                    channel: 0,
                    customer: 0,
                    probability: 0.3,
                },
                Edge {
                    channel: 1,
                    customer: 0,
                    probability: 0.6,
                },
            ],
            vec![0.5, 0.5],
            vec![1.0, 1.0],
        )
        .unwrap();
        let x = v(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(f.hessian_entry(&x, 0, 1, 1, 1).unwrap(), 0.0);
        assert!(f.hessian_entry(&x, 1, 0, 1, 1).unwrap() < 0.0);
        assert!(f.hessian_entry(&x, 2, 0, 0, 0).is_err());
        let h = f.hessian(&x).unwrap();
        assert_eq!(h[(0, 2)], 0.0);
        assert!((h[(2, 3)] - f.hessian_entry(&x, 1, 0, 1, 1).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn negative_allocation_is_rejected() {
        let f = single(1.0);
        assert!(f.value(&v(&[-0.1])).is_err());
        assert!(f.gradient(&v(&[-0.1])).is_err());
    }

    #[test]
    fn parse_maps_single_line() {
        let (ch, cu, edges) = parse_bipartite("k1\tc1\t3\n", Path::new("x")).unwrap();
        assert_eq!((ch.len(), cu.len(), edges.len()), (1, 1, 1));
        let f = BudgetAllocationObjective::from_frequencies(
            1,
            1,
            &edges,
            FrequencyMapping::Exponential,
            &BudgetOptions::default(),
        )
        .unwrap();
        let expected = 1.0 - (-1.0f64).exp();
        assert!((f.edges()[0].probability - expected).abs() < 1e-15);
        // mean frequency equals the maximum here, so the budget limit is the same value
        assert!((f.per_advertiser_upper()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn parse_sums_duplicates_and_indexes_in_order() {
        let text = "k2 c1 1\nk1 c1 2\nk2 c1 4\n\n# note\nk1 c2 1\n";
        let (ch, cu, edges) = parse_bipartite(text, Path::new("x")).unwrap();
        assert_eq!(ch, vec!["k2", "k1"]);
        assert_eq!(cu, vec!["c1", "c2"]);
        assert_eq!(edges.len(), 3);
        assert_eq!(edges[0].frequency, 5.0);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_bipartite("k1 c1 2\nk1 c2\n", Path::new("g.tsv")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_bipartite("k1 c1 0.5\n", Path::new("g.tsv")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(matches!(
            parse_bipartite("", Path::new("g.tsv")).unwrap_err(),
            Error::NoEdges
        ));
    }

    #[test]
    fn linear_mapping_caps() {
        let m = FrequencyMapping::Linear {
            cap: FrequencyMapping::DEFAULT_LINEAR_CAP,
        };
        assert_eq!(m.probability(10.0, 10.0), 0.99);
        assert_eq!(m.probability(5.0, 10.0), 0.5);
    }

    #[test]
    fn probability_outside_open_interval_is_rejected() {
        let edges = [FrequencyEdge {
            channel: 0,
            customer: 0,
            frequency: 2.0,
        }];
        let err = BudgetAllocationObjective::from_frequencies(
            1,
            1,
            &edges,
            FrequencyMapping::Linear { cap: 1.0 },
            &BudgetOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("outside (0, 1)"));
    }

    #[test]
    fn synthetic_round_trips_through_tsv() {
        let spec = SyntheticBipartite {
            channels: 4,
            customers: 7,
            density: 0.4,
            max_frequency: 5,
        };
        let edges = synthetic_bipartite(3, &spec).unwrap();
        assert_eq!(edges, synthetic_bipartite(3, &spec).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.tsv");
        write_bipartite_tsv(&path, &edges).unwrap();
        let (_, _, back) = parse_bipartite(&std::fs::read_to_string(&path).unwrap(), &path).unwrap();
        assert_eq!(back.len(), edges.len());
        let total: f64 = edges.iter().map(|e| e.frequency).sum();
        assert_eq!(back.iter().map(|e| e.frequency).sum::<f64>(), total);
    }
}
