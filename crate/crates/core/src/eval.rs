//! Quality metrics of a trained model and plot-data export.

use std::fmt::Write as _;

use crate::autodiff::Jet2;
use crate::dataset::{fmt17, FieldDataset};
use crate::error::{Error, Result};
use crate::kernels::{eval_kernel, KernelSpec};
use crate::nn::IPinnModel;
use crate::spectral::dispersion;
use crate::training::mirror_pairs;

pub const KERNEL_PLOT_HEADER: &str = "x C_true C_learned";
pub const FIELD_PLOT_HEADER: &str = "x t theta_data theta_model";

#[derive(Debug, Clone, PartialEq)]
pub struct KernelMetrics {
    /// `Σ |C(x) − C(−x)|` over the positive grid nodes.
    pub symmetry_defect: f64,
    pub min_c: f64,
    /// Smallest `ω(k)²` over nonzero grid wave numbers.
    pub min_omega2: f64,
    pub positivity: bool,
    /// Pearson correlation with the reference on `|x| < support`.
    pub correlation: f64,
    pub sup_error: f64,
    /// Largest drop `C(x_a) − C(x_b)`, `0 ≤ x_a < x_b < support`, relative
    /// to the range of `C` there.
    pub monotone_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldMetrics {
    pub l2_error: f64,
    pub sup_error: f64,
    pub relative_l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub kernel: KernelMetrics,
    pub field: FieldMetrics,
    pub parametric: Option<(f64, f64)>,
}

/// Pearson correlation; NaN when either side is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Largest drop along increasing index, as a fraction of the value range.
pub fn monotone_violation(values: &[f64]) -> f64 {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    let mut running_max = f64::NEG_INFINITY;
    let mut drop: f64 = 0.0;
    for v in values {
        running_max = running_max.max(*v);
        drop = drop.max(running_max - v);
    }
    if hi > lo {
        drop / (hi - lo)
    } else {
        0.0
    }
}

/// Compares the learned kernel with `truth` on the dataset's x grid.
pub fn kernel_metrics(model: &IPinnModel, truth: Option<&KernelSpec>, dataset: &FieldDataset) -> Result<KernelMetrics> {
    let g = dataset.grid();
    let xs = g.xs();
    let learned: Vec<f64> = xs.iter().map(|&x| model.try_forward_c(x)).collect::<Result<_>>()?;
    let mut symmetry_defect = 0.0;
    for &(a, _) in &mirror_pairs(dataset) {
        symmetry_defect += (learned[a] - model.try_forward_c(-xs[a])?).abs();
    }
    let min_c = learned.iter().copied().fold(f64::INFINITY, f64::min);
    let kv = model.kernel_vector(model.kernel_delta(), g.h())?;
    let table = dispersion(&kv, g);
    let support = truth.map_or(model.kernel_delta(), |t| t.support());
    let (mut c_true, mut c_model, mut ramp) = (Vec::new(), Vec::new(), Vec::new());
    for (i, &x) in xs.iter().enumerate() {
        if x.abs() < support {
            if let Some(t) = truth {
                c_true.push(eval_kernel(t, x));
            }
            c_model.push(learned[i]);
        }
        if (0.0..support).contains(&x) {
            ramp.push(learned[i]);
        }
    }
    let (correlation, sup_error) = match truth {
        Some(_) => {
            let err = c_true.iter().zip(&c_model).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            (pearson(&c_true, &c_model), err)
        }
        None => (f64::NAN, f64::NAN),
    };
    Ok(KernelMetrics {
        symmetry_defect,
        min_c,
        min_omega2: table.min_nonzero(),
        positivity: table.positive_for_nonzero_k(),
        correlation,
        sup_error,
        monotone_violation: monotone_violation(&ramp),
    })
}

pub fn field_metrics(model: &IPinnModel, dataset: &FieldDataset) -> Result<FieldMetrics> {
    let g = dataset.grid();
    let (mut sq, mut sup, mut norm) = (0.0, 0.0f64, 0.0);
    for j in 0..g.n_t {
        for i in 0..g.n_x {
            let m = model.try_forward_theta(g.x(i), Jet2::constant(g.t(j)))?.v;
            let d = dataset.at(i, j);
            sq += (m - d) * (m - d);
            sup = sup.max((m - d).abs());
            norm += d * d;
        }
    }
    let l2 = sq.sqrt();
    Ok(FieldMetrics { l2_error: l2, sup_error: sup, relative_l2: l2 / norm.sqrt() })
}

pub fn evaluate(model: &IPinnModel, truth: Option<&KernelSpec>, dataset: &FieldDataset) -> Result<EvalReport> {
    Ok(EvalReport {
        kernel: kernel_metrics(model, truth, dataset)?,
        field: field_metrics(model, dataset)?,
        parametric: model.parametric_kernel(),
    })
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let k = &self.kernel;
        let f = &self.field;
        let mut s = String::new();
        let mut put = |key: &str, v: String| {
            let _ = writeln!(s, "{key} = {v}");
        };
        put("symmetry_defect", fmt17(k.symmetry_defect));
        put("min_c", fmt17(k.min_c));
        put("min_omega2", fmt17(k.min_omega2));
        put("positivity", k.positivity.to_string());
        put("correlation", fmt17(k.correlation));
        put("kernel_sup_error", fmt17(k.sup_error));
        put("monotone_violation", fmt17(k.monotone_violation));
        put("theta_l2_error", fmt17(f.l2_error));
        put("theta_sup_error", fmt17(f.sup_error));
        put("theta_relative_l2", fmt17(f.relative_l2));
        if let Some((g, sg)) = self.parametric {
            put("gamma_star", fmt17(g));
            put("sigma_star", fmt17(sg));
        }
        s
    }
}

/// `x C_true C_learned` on the dataset's x grid.
pub fn kernel_plot(model: &IPinnModel, truth: Option<&KernelSpec>, dataset: &FieldDataset) -> Result<String> {
    let mut s = format!("{KERNEL_PLOT_HEADER}\n");
    for x in dataset.grid().xs() {
        let t = truth.map_or(f64::NAN, |k| eval_kernel(k, x));
        let _ = writeln!(s, "{} {} {}", fmt17(x), fmt17(t), fmt17(model.try_forward_c(x)?));
    }
    Ok(s)
}

/// `x t theta_data theta_model` for every dataset sample, time-major.
pub fn field_plot(model: &IPinnModel, dataset: &FieldDataset) -> Result<String> {
    let g = dataset.grid();
    let mut s = format!("{FIELD_PLOT_HEADER}\n");
    for j in 0..g.n_t {
        for i in 0..g.n_x {
            let (x, t) = (g.x(i), g.t(j));
            let m = model.try_forward_theta(x, Jet2::constant(t))?.v;
            let _ = writeln!(s, "{} {} {} {}", fmt17(x), fmt17(t), fmt17(dataset.at(i, j)), fmt17(m));
        }
    }
    Ok(s)
}

/// Reads a whitespace-separated table with the given header.
pub fn parse_table(text: &str, header: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(Error::parse("plot table", format!("expected header {header:?}")));
    }
    let width = header.split(' ').count();
    lines
        .map(|l| {
            let row: Vec<f64> = l
                .split(' ')
                .map(|c| c.parse::<f64>().map_err(|e| Error::parse("plot table", e.to_string())))
                .collect::<Result<_>>()?;
            if row.len() != width {
                return Err(Error::parse("plot table", format!("row {l:?} has {} columns", row.len())));
            }
            Ok(row)
        })
        .collect()
}
