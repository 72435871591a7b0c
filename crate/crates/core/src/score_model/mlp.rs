use super::{Checkpoint, Jet, ScoreModel};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Fully connected tanh network on the input `(x, t)` with a scalar linear
/// output. Derivatives in the inputs are carried forward as dual numbers; the
/// parameter gradient runs backwards through both the value and the tangent.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpScoreModel {
    input_dim: usize,
    widths: Vec<usize>,
    params: Vec<f64>,
}

struct Trace {
    /// Per layer input (value, tangent), the first entry being `(x, t)`.
    h: Vec<(Vec<f64>, Vec<f64>)>,
    /// Pre-activation tangents of the hidden layers.
    ad: Vec<Vec<f64>>,
}

impl MlpScoreModel {
    /// `x_dim` spatial inputs plus time, hidden `widths`, Glorot-scaled
    /// normal weights from `seed`.
    pub fn new(x_dim: usize, widths: Vec<usize>, seed: u64) -> Result<Self> {
        let input_dim = x_dim + 1;
        let n = Self::count(input_dim, &widths);
        let mut m = Self::with_params(input_dim, widths, vec![0.0; n])?;
        let mut rng = Rng::new(seed);
        let mut off = 0;
        for (fan_in, fan_out) in m.shapes() {
            let sd = (2.0 / (fan_in + fan_out) as f64).sqrt();
            for v in &mut m.params[off..off + fan_in * fan_out] {
                *v = sd * rng.normal();
            }
            off += fan_in * fan_out + fan_out;
        }
        Ok(m)
    }

    pub fn with_params(input_dim: usize, widths: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        if input_dim < 2 || widths.is_empty() || widths.contains(&0) {
            return Err(Error::Validation("MLP needs x and t inputs and non-empty hidden layers".into()));
        }
        let n = Self::count(input_dim, &widths);
        if params.len() != n {
            return Err(Error::Validation(format!("expected {n} MLP parameters, got {}", params.len())));
        }
        Ok(Self { input_dim, widths, params })
    }

    fn count(input_dim: usize, widths: &[usize]) -> usize {
        let mut prev = input_dim;
        let mut n = 0;
        for &w in widths.iter().chain(std::iter::once(&1)) {
            n += prev * w + w;
            prev = w;
        }
        n
    }

    /// `(fan_in, fan_out)` per layer, output layer last.
    fn shapes(&self) -> Vec<(usize, usize)> {
        let mut prev = self.input_dim;
        let mut out = Vec::new();
        for &w in self.widths.iter().chain(std::iter::once(&1)) {
            out.push((prev, w));
            prev = w;
        }
        out
    }

    fn forward(&self, x: &[f64], t: f64, dx: &[f64], dt: f64) -> (Jet, Trace) {
        let mut hv: Vec<f64> = x.iter().copied().chain(std::iter::once(t)).collect();
        let mut hd: Vec<f64> = dx.iter().copied().chain(std::iter::once(dt)).collect();
        let shapes = self.shapes();
        let last = shapes.len() - 1;
        let mut trace = Trace { h: Vec::with_capacity(shapes.len()), ad: Vec::new() };
        let mut off = 0;
        for (l, &(fan_in, fan_out)) in shapes.iter().enumerate() {
            let w = &self.params[off..off + fan_in * fan_out];
            let b = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            off += fan_in * fan_out + fan_out;
            let mut av = b.to_vec();
            let mut ad = vec![0.0; fan_out];
            for i in 0..fan_out {
                let row = &w[i * fan_in..(i + 1) * fan_in];
                for j in 0..fan_in {
                    av[i] += row[j] * hv[j];
                    ad[i] += row[j] * hd[j];
                }
            }
            trace.h.push((std::mem::take(&mut hv), std::mem::take(&mut hd)));
            if l == last {
                return (Jet { value: av[0], tangent: ad[0] }, trace);
            }
            hv = av.iter().map(|a| a.tanh()).collect();
            hd = hv.iter().zip(&ad).map(|(h, a)| (1.0 - h * h) * a).collect();
            trace.ad.push(ad);
        }
        unreachable!("network has an output layer")
    }
}

impl ScoreModel for MlpScoreModel {
    fn x_dim(&self) -> usize {
        self.input_dim - 1
    }

    fn num_params(&self) -> usize {
        self.params.len()
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn jet(&self, x: &[f64], t: f64, dx: &[f64], dt: f64) -> Jet {
        self.forward(x, t, dx, dt).0
    }

    fn jet_param_grad(&self, x: &[f64], t: f64, dx: &[f64], dt: f64, gv: f64, gd: f64, grad: &mut [f64]) {
        let (_, trace) = self.forward(x, t, dx, dt);
        let shapes = self.shapes();
        let mut offsets = Vec::with_capacity(shapes.len());
        let mut off = 0;
        for &(fi, fo) in &shapes {
            offsets.push(off);
            off += fi * fo + fo;
        }
        // adjoints of the pre-activation value and tangent of the current layer
        let mut ga = vec![gv];
        let mut gad = vec![gd];
        for l in (0..shapes.len()).rev() {
            let (fan_in, fan_out) = shapes[l];
            let off = offsets[l];
            let (hv, hd) = &trace.h[l];
            for i in 0..fan_out {
                for j in 0..fan_in {
                    grad[off + i * fan_in + j] += ga[i] * hv[j] + gad[i] * hd[j];
                }
                grad[off + fan_in * fan_out + i] += ga[i];
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off..off + fan_in * fan_out];
            let mut gh = vec![0.0; fan_in];
            let mut ghd = vec![0.0; fan_in];
            for i in 0..fan_out {
                for j in 0..fan_in {
                    gh[j] += w[i * fan_in + j] * ga[i];
                    ghd[j] += w[i * fan_in + j] * gad[i];
                }
            }
            // hv = tanh(a), hd = (1 - hv²) ad
            let mut na = vec![0.0; fan_in];
            let mut nad = vec![0.0; fan_in];
            for j in 0..fan_in {
                let s = 1.0 - hv[j] * hv[j];
                let ad = trace.ad[l - 1][j];
                na[j] = gh[j] * s + ghd[j] * ad * (-2.0 * hv[j]) * s;
                nad[j] = ghd[j] * s;
            }
            ga = na;
            gad = nad;
        }
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint::Mlp { input_dim: self.input_dim, widths: self.widths.clone(), params: self.params.clone() }
    }
}
