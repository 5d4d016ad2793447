//! Central finite-difference check of the analytic adjoints.
//!
//! Each target is reduced to a scalar loss `sum(r * output)` with fixed
//! random weights `r`. Every parameter (inputs and weights) is perturbed by
//! `+/- step`; if the perturbation flips the sign of any pre-activation the
//! parameter sits on a ReLU kink and is skipped rather than compared.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::{
    directional_scan_grad, irnn_backward, irnn_forward, sam_forward, scan_forward, AttentionWeights,
    Direction, DirectionalWeights, MixWeights, SamParams, TensorMap,
};
use crate::error::{Error, Result};

/// Largest map accepted by [`gradcheck`], as `(height, width, channels)`.
pub const MAX_SHAPE: (usize, usize, usize) = (8, 8, 4);

/// Gradients smaller than this are compared in absolute rather than
/// relative terms.
pub const REL_ERR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradcheckTarget {
    DirectionalScan(Direction),
    TwoRoundIrnn,
    AttentionGate,
}

impl GradcheckTarget {
    /// The four scans, the two-round IRNN and the gated composite.
    pub fn all() -> Vec<GradcheckTarget> {
        let mut targets: Vec<_> = Direction::ALL.iter().map(|&d| GradcheckTarget::DirectionalScan(d)).collect();
        targets.push(GradcheckTarget::TwoRoundIrnn);
        targets.push(GradcheckTarget::AttentionGate);
        targets
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub max_rel_err: f64,
    pub num_checked: usize,
    pub num_skipped_kinks: usize,
}

impl GradcheckReport {
    fn merge(&mut self, other: &GradcheckReport) {
        self.max_rel_err = self.max_rel_err.max(other.max_rel_err);
        self.num_checked += other.num_checked;
        self.num_skipped_kinks += other.num_skipped_kinks;
    }
}

/// `|a - n| / max(|a|, |n|, REL_ERR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// A random problem instance for one target.
struct Problem {
    shape: (usize, usize, usize),
    x: TensorMap,
    features: TensorMap,
    params: SamParams,
    r_out: TensorMap,
    r_att: Vec<f64>,
}

fn uniform_map(rng: &mut ChaCha12Rng, shape: (usize, usize, usize), lo: f64, hi: f64) -> TensorMap {
    let (h, w, c) = shape;
    TensorMap::new(h, w, c, (0..h * w * c).map(|_| rng.random_range(lo..hi)).collect()).expect("shape")
}

impl Problem {
    fn random(seed: u64, shape: (usize, usize, usize)) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let (h, w, c) = shape;
        let mut alphas = || DirectionalWeights {
            alpha: std::array::from_fn(|_| (0..c).map(|_| rng.random_range(0.5..1.2)).collect()),
        };
        let round1 = alphas();
        let round2 = alphas();
        let scale = 1.0 / (4.0 * c as f64).sqrt();
        let params = SamParams {
            round1,
            round2,
            mix1: MixWeights::random(c, scale, &mut rng),
            mix2: MixWeights::random(c, scale, &mut rng),
            attention: AttentionWeights {
                projection: (0..c).map(|_| rng.random_range(-1.0..1.0)).collect(),
                bias: rng.random_range(-0.5..0.5),
            },
        };
        Problem {
            shape,
            x: uniform_map(&mut rng, shape, -1.0, 1.0),
            features: uniform_map(&mut rng, shape, -1.0, 1.0),
            params,
            r_out: uniform_map(&mut rng, shape, -1.0, 1.0),
            r_att: (0..h * w).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }
}

/// Loss, sign pattern of every pre-activation, and the analytic gradient for
/// a flat parameter vector.
trait Objective {
    fn theta(&self) -> Vec<f64>;
    fn eval(&self, theta: &[f64]) -> (f64, Vec<bool>);
    fn grad(&self, theta: &[f64]) -> Vec<f64>;
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn signs<'a>(pre: impl Iterator<Item = &'a f64>) -> Vec<bool> {
    pre.map(|&z| z > 0.0).collect()
}

struct ScanObjective<'a> {
    p: &'a Problem,
    dir: Direction,
}

impl Objective for ScanObjective<'_> {
    fn theta(&self) -> Vec<f64> {
        let mut t = self.p.x.data().to_vec();
        t.extend_from_slice(self.p.params.round1.get(self.dir));
        t
    }

    fn eval(&self, theta: &[f64]) -> (f64, Vec<bool>) {
        let (h, w, c) = self.p.shape;
        let n = h * w * c;
        let x = TensorMap::new(h, w, c, theta[..n].to_vec()).expect("shape");
        let (out, pre) = scan_forward(&x, self.dir, &theta[n..]);
        (dot(out.data(), self.p.r_out.data()), signs(pre.iter()))
    }

    fn grad(&self, theta: &[f64]) -> Vec<f64> {
        let (h, w, c) = self.p.shape;
        let n = h * w * c;
        let x = TensorMap::new(h, w, c, theta[..n].to_vec()).expect("shape");
        let mut weights = DirectionalWeights::identity(c);
        weights.get_mut(self.dir).copy_from_slice(&theta[n..]);
        let (dx, dalpha) = directional_scan_grad(&x, self.dir, &weights, &self.p.r_out).expect("valid problem");
        let mut g = dx.into_data();
        g.extend(dalpha);
        g
    }
}

/// Flat layout: `x, round1, round2, mix1, mix2`, then for the gated
/// composite `features, projection, bias`.
struct Layout {
    n: usize,
    c: usize,
}

impl Layout {
    fn pack(&self, p: &Problem, gated: bool) -> Vec<f64> {
        let mut t = p.x.data().to_vec();
        t.extend(p.params.round1.flat());
        t.extend(p.params.round2.flat());
        t.extend_from_slice(p.params.mix1.weights());
        t.extend_from_slice(p.params.mix2.weights());
        if gated {
            t.extend_from_slice(p.features.data());
            t.extend_from_slice(&p.params.attention.projection);
            t.push(p.params.attention.bias);
        }
        t
    }

    fn unpack(&self, p: &Problem, theta: &[f64], gated: bool) -> (TensorMap, TensorMap, SamParams) {
        let (h, w, c) = p.shape;
        let (n, a, m) = (self.n, 4 * self.c, 4 * self.c * self.c);
        let mut at = 0;
        let mut take = |len: usize| {
            let s = &theta[at..at + len];
            at += len;
            s
        };
        let x = TensorMap::new(h, w, c, take(n).to_vec()).expect("shape");
        let round1 = DirectionalWeights::from_flat(take(a), c);
        let round2 = DirectionalWeights::from_flat(take(a), c);
        let mix1 = MixWeights::new(c, take(m).to_vec()).expect("shape");
        let mix2 = MixWeights::new(c, take(m).to_vec()).expect("shape");
        let (features, attention) = if gated {
            let f = TensorMap::new(h, w, c, take(n).to_vec()).expect("shape");
            let projection = take(c).to_vec();
            let bias = take(1)[0];
            (f, AttentionWeights { projection, bias })
        } else {
            (p.features.clone(), p.params.attention.clone())
        };
        (
            x,
            features,
            SamParams {
                round1,
                round2,
                mix1,
                mix2,
                attention,
            },
        )
    }
}

struct IrnnObjective<'a> {
    p: &'a Problem,
    layout: Layout,
}

impl Objective for IrnnObjective<'_> {
    fn theta(&self) -> Vec<f64> {
        self.layout.pack(self.p, false)
    }

    fn eval(&self, theta: &[f64]) -> (f64, Vec<bool>) {
        let (x, _, s) = self.layout.unpack(self.p, theta, false);
        let (out, tape) = irnn_forward(&x, &s.round1, &s.round2, &s.mix1, &s.mix2);
        (dot(out.data(), self.p.r_out.data()), signs(tape.pre_activations()))
    }

    fn grad(&self, theta: &[f64]) -> Vec<f64> {
        let (x, _, s) = self.layout.unpack(self.p, theta, false);
        let (_, tape) = irnn_forward(&x, &s.round1, &s.round2, &s.mix1, &s.mix2);
        let g = irnn_backward(&tape, &s.round1, &s.round2, &s.mix1, &s.mix2, &self.p.r_out);
        let mut out = g.dx.into_data();
        out.extend(g.round1.flat());
        out.extend(g.round2.flat());
        out.extend(g.mix1);
        out.extend(g.mix2);
        out
    }
}

struct GateObjective<'a> {
    p: &'a Problem,
    layout: Layout,
}

impl Objective for GateObjective<'_> {
    fn theta(&self) -> Vec<f64> {
        self.layout.pack(self.p, true)
    }

    fn eval(&self, theta: &[f64]) -> (f64, Vec<bool>) {
        let (x, f, s) = self.layout.unpack(self.p, theta, true);
        let (gated, tape) = sam_forward(&f, &x, &s);
        let loss = dot(gated.data(), self.p.r_out.data()) + dot(&tape.attention, &self.p.r_att);
        (loss, signs(tape.irnn.pre_activations()))
    }

    fn grad(&self, theta: &[f64]) -> Vec<f64> {
        let (x, f, s) = self.layout.unpack(self.p, theta, true);
        let g = super::attention_gate_grad(&f, &x, &s, &self.p.r_out, &self.p.r_att).expect("valid problem");
        let mut out = g.irnn.dx.into_data();
        out.extend(g.irnn.round1.flat());
        out.extend(g.irnn.round2.flat());
        out.extend(g.irnn.mix1);
        out.extend(g.irnn.mix2);
        out.extend(g.dfeatures.into_data());
        out.extend(g.projection);
        out.push(g.bias);
        out
    }
}

fn check(objective: &dyn Objective, step: f64) -> GradcheckReport {
    let theta = objective.theta();
    let analytic = objective.grad(&theta);
    let mut report = GradcheckReport {
        max_rel_err: 0.0,
        num_checked: 0,
        num_skipped_kinks: 0,
    };
    let mut probe = theta.clone();
    for i in 0..theta.len() {
        probe[i] = theta[i] + step;
        let (plus, plus_signs) = objective.eval(&probe);
        probe[i] = theta[i] - step;
        let (minus, minus_signs) = objective.eval(&probe);
        probe[i] = theta[i];
        if plus_signs != minus_signs {
            report.num_skipped_kinks += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * step);
        report.max_rel_err = report.max_rel_err.max(relative_error(analytic[i], numeric));
        report.num_checked += 1;
    }
    report
}

fn validate(shape: (usize, usize, usize), step: f64) -> Result<()> {
    let (h, w, c) = shape;
    if h == 0 || w == 0 || c == 0 || h > MAX_SHAPE.0 || w > MAX_SHAPE.1 || c > MAX_SHAPE.2 {
        return Err(Error::Parameter(format!(
            "gradcheck shape {h}x{w}x{c} outside 1x1x1..={}x{}x{}",
            MAX_SHAPE.0, MAX_SHAPE.1, MAX_SHAPE.2
        )));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Parameter(format!("finite-difference step {step} must be positive")));
    }
    Ok(())
}

/// Checks one target on a random instance drawn from `seed`.
pub fn gradcheck_target(
    target: GradcheckTarget,
    seed: u64,
    shape: (usize, usize, usize),
    step: f64,
) -> Result<GradcheckReport> {
    validate(shape, step)?;
    let problem = Problem::random(seed, shape);
    let layout = Layout {
        n: shape.0 * shape.1 * shape.2,
        c: shape.2,
    };
    Ok(match target {
        GradcheckTarget::DirectionalScan(dir) => check(&ScanObjective { p: &problem, dir }, step),
        GradcheckTarget::TwoRoundIrnn => check(&IrnnObjective { p: &problem, layout }, step),
        GradcheckTarget::AttentionGate => check(&GateObjective { p: &problem, layout }, step),
    })
}

/// Checks every target in [`GradcheckTarget::all`] and merges the reports.
pub fn gradcheck(seed: u64, shape: (usize, usize, usize), step: f64) -> Result<GradcheckReport> {
    let mut total = GradcheckReport {
        max_rel_err: 0.0,
        num_checked: 0,
        num_skipped_kinks: 0,
    };
    for target in GradcheckTarget::all() {
        total.merge(&gradcheck_target(target, seed, shape, step)?);
    }
    Ok(total)
}
