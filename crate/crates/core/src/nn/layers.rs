use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::shape(format!("{what}: length {got}, expected {want}")));
    }
    Ok(())
}

fn check_vec<T: Scalar>(what: &str, t: &Tensor<T>, want: usize) -> Result<()> {
    if t.shape() != [want] {
        return Err(Error::shape(format!("{what}: shape {:?}, expected [{want}]", t.shape())));
    }
    Ok(())
}

/// Row `index` of an embedding table.
pub fn embed_forward<T: Scalar>(table: &Tensor<T>, index: usize) -> Result<&[T]> {
    table.row(index)
}

/// Adds `dy` into row `index` of the table gradient.
pub fn embed_backward<T: Scalar>(grad_table: &mut Tensor<T>, index: usize, dy: &[T]) -> Result<()> {
    let row = grad_table.row_mut(index)?;
    check_len("embedding gradient", dy.len(), row.len())?;
    for (g, &d) in row.iter_mut().zip(dy) {
        *g += d;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    Relu,
    Tanh,
    #[default]
    Identity,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn grad_from_output<T: Scalar>(self, y: T) -> T {
        match self {
            Activation::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - y * y,
            Activation::Identity => T::one(),
        }
    }
}

/// `y = act(W x + b)` with `W` of shape `[out, in]`.
pub fn dense_forward<T: Scalar>(w: &Tensor<T>, b: &Tensor<T>, x: &[T], act: Activation) -> Result<Vec<T>> {
    let (out, inp) = w.dims2()?;
    check_vec("dense bias", b, out)?;
    check_len("dense input", x.len(), inp)?;
    let wd = w.data();
    Ok((0..out)
        .map(|r| {
            let row = &wd[r * inp..(r + 1) * inp];
            let z = b.data()[r] + row.iter().zip(x).map(|(&a, &v)| a * v).sum::<T>();
            act.apply(z)
        })
        .collect())
}

/// Accumulates `dW`, `db` and returns `dx`. `y` is the forward output.
pub fn dense_backward<T: Scalar>(
    w: &Tensor<T>,
    x: &[T],
    y: &[T],
    dy: &[T],
    act: Activation,
    dw: &mut Tensor<T>,
    db: &mut Tensor<T>,
) -> Result<Vec<T>> {
    let (out, inp) = w.dims2()?;
    w.same_shape(dw)?;
    check_vec("dense bias gradient", db, out)?;
    check_len("dense input", x.len(), inp)?;
    check_len("dense output", y.len(), out)?;
    check_len("dense output gradient", dy.len(), out)?;
    let mut dx = vec![T::zero(); inp];
    let (wd, dwd) = (w.data(), dw.data_mut());
    for r in 0..out {
        let dz = dy[r] * act.grad_from_output(y[r]);
        if dz == T::zero() {
            continue;
        }
        db.data_mut()[r] += dz;
        let row = &wd[r * inp..(r + 1) * inp];
        let drow = &mut dwd[r * inp..(r + 1) * inp];
        for k in 0..inp {
            drow[k] += dz * x[k];
            dx[k] += row[k] * dz;
        }
    }
    Ok(dx)
}

#[inline]
fn sigmoid<T: Scalar>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

struct LstmShape {
    input: usize,
    hidden: usize,
}

fn lstm_shape<T: Scalar>(wx: &Tensor<T>, wh: &Tensor<T>, b: &Tensor<T>) -> Result<LstmShape> {
    let (g, input) = wx.dims2()?;
    let (g2, hidden) = wh.dims2()?;
    if g != 4 * hidden || g2 != g {
        return Err(Error::shape(format!(
            "LSTM weights {:?} / {:?} do not stack four gates of width {hidden}",
            wx.shape(),
            wh.shape()
        )));
    }
    check_vec("LSTM bias", b, g)?;
    Ok(LstmShape { input, hidden })
}

/// Gate pre-activations into `gates`, then activated in place: `[i | f | g | o]`.
#[inline]
fn lstm_cell<T: Scalar>(
    s: &LstmShape,
    wx: &[T],
    wh: &[T],
    b: &[T],
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    gates: &mut [T],
    c: &mut [T],
    tanh_c: &mut [T],
    h: &mut [T],
) {
    let (hn, inp) = (s.hidden, s.input);
    for r in 0..4 * hn {
        let mut z = b[r];
        let rx = &wx[r * inp..(r + 1) * inp];
        for k in 0..inp {
            z += rx[k] * x[k];
        }
        let rh = &wh[r * hn..(r + 1) * hn];
        for k in 0..hn {
            z += rh[k] * h_prev[k];
        }
        gates[r] = if (2 * hn..3 * hn).contains(&r) { z.tanh() } else { sigmoid(z) };
    }
    for j in 0..hn {
        let (i, f, g, o) = (gates[j], gates[hn + j], gates[2 * hn + j], gates[3 * hn + j]);
        c[j] = f * c_prev[j] + i * g;
        tanh_c[j] = c[j].tanh();
        h[j] = o * tanh_c[j];
    }
}

/// One LSTM step from explicit state.
pub fn lstm_step<T: Scalar>(
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    wx: &Tensor<T>,
    wh: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    let s = lstm_shape(wx, wh, b)?;
    check_len("LSTM input", x.len(), s.input)?;
    check_len("LSTM hidden state", h_prev.len(), s.hidden)?;
    check_len("LSTM cell state", c_prev.len(), s.hidden)?;
    let mut gates = vec![T::zero(); 4 * s.hidden];
    let mut c = vec![T::zero(); s.hidden];
    let mut tc = vec![T::zero(); s.hidden];
    let mut h = vec![T::zero(); s.hidden];
    lstm_cell(&s, wx.data(), wh.data(), b.data(), x, h_prev, c_prev, &mut gates, &mut c, &mut tc, &mut h);
    Ok((h, c))
}

/// Activations cached by [`lstm_forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmTrace<T> {
    pub input: usize,
    pub hidden: usize,
    pub steps: usize,
    xs: Vec<T>,
    gates: Vec<T>,
    cells: Vec<T>,
    tanh_c: Vec<T>,
    hs: Vec<T>,
}

impl<T: Scalar> LstmTrace<T> {
    /// All hidden states, `steps × hidden`, row per step.
    pub fn hidden_states(&self) -> &[T] {
        &self.hs
    }

    pub fn h(&self, t: usize) -> &[T] {
        &self.hs[t * self.hidden..(t + 1) * self.hidden]
    }

    pub fn c(&self, t: usize) -> &[T] {
        &self.cells[t * self.hidden..(t + 1) * self.hidden]
    }

    pub fn last_h(&self) -> &[T] {
        self.h(self.steps - 1)
    }
}

/// Runs the LSTM from zero state over `xs` (`steps × input`, row per step).
pub fn lstm_forward<T: Scalar>(wx: &Tensor<T>, wh: &Tensor<T>, b: &Tensor<T>, xs: &[T], steps: usize) -> Result<LstmTrace<T>> {
    let s = lstm_shape(wx, wh, b)?;
    if steps == 0 {
        return Err(Error::shape("LSTM over an empty sequence"));
    }
    check_len("LSTM inputs", xs.len(), steps * s.input)?;
    let hn = s.hidden;
    let mut tr = LstmTrace {
        input: s.input,
        hidden: hn,
        steps,
        xs: xs.to_vec(),
        gates: vec![T::zero(); steps * 4 * hn],
        cells: vec![T::zero(); steps * hn],
        tanh_c: vec![T::zero(); steps * hn],
        hs: vec![T::zero(); steps * hn],
    };
    let zero = vec![T::zero(); hn];
    for t in 0..steps {
        let (h_before, h_rest) = tr.hs.split_at_mut(t * hn);
        let (c_before, c_rest) = tr.cells.split_at_mut(t * hn);
        let h_prev = if t == 0 { &zero[..] } else { &h_before[(t - 1) * hn..] };
        let c_prev = if t == 0 { &zero[..] } else { &c_before[(t - 1) * hn..] };
        lstm_cell(
            &s,
            wx.data(),
            wh.data(),
            b.data(),
            &xs[t * s.input..(t + 1) * s.input],
            h_prev,
            c_prev,
            &mut tr.gates[t * 4 * hn..(t + 1) * 4 * hn],
            &mut c_rest[..hn],
            &mut tr.tanh_c[t * hn..(t + 1) * hn],
            &mut h_rest[..hn],
        );
    }
    Ok(tr)
}

/// Backpropagation through time. `dh` holds the loss gradient w.r.t. every hidden
/// state (`steps × hidden`). Accumulates weight gradients and returns `dxs`.
pub fn lstm_backward<T: Scalar>(
    wx: &Tensor<T>,
    wh: &Tensor<T>,
    trace: &LstmTrace<T>,
    dh: &[T],
    dwx: &mut Tensor<T>,
    dwh: &mut Tensor<T>,
    db: &mut Tensor<T>,
) -> Result<Vec<T>> {
    let (hn, inp, steps) = (trace.hidden, trace.input, trace.steps);
    if wx.shape() != [4 * hn, inp] || wh.shape() != [4 * hn, hn] {
        return Err(Error::shape("LSTM weights do not match the trace"));
    }
    wx.same_shape(dwx)?;
    wh.same_shape(dwh)?;
    check_vec("LSTM bias gradient", db, 4 * hn)?;
    check_len("LSTM hidden gradient", dh.len(), steps * hn)?;

    let mut dxs = vec![T::zero(); steps * inp];
    let mut dh_next = vec![T::zero(); hn];
    let mut dc_next = vec![T::zero(); hn];
    let mut dz = vec![T::zero(); 4 * hn];
    let zero = vec![T::zero(); hn];
    let one = T::one();
    let (wxd, whd) = (wx.data(), wh.data());
    for t in (0..steps).rev() {
        let gates = &trace.gates[t * 4 * hn..(t + 1) * 4 * hn];
        let tc = &trace.tanh_c[t * hn..(t + 1) * hn];
        let c_prev = if t == 0 { &zero[..] } else { trace.c(t - 1) };
        let h_prev = if t == 0 { &zero[..] } else { trace.h(t - 1) };
        for j in 0..hn {
            let (i, f, g, o) = (gates[j], gates[hn + j], gates[2 * hn + j], gates[3 * hn + j]);
            let dhj = dh[t * hn + j] + dh_next[j];
            let dc = dc_next[j] + dhj * o * (one - tc[j] * tc[j]);
            dz[j] = dc * g * i * (one - i);
            dz[hn + j] = dc * c_prev[j] * f * (one - f);
            dz[2 * hn + j] = dc * i * (one - g * g);
            dz[3 * hn + j] = dhj * tc[j] * o * (one - o);
            dc_next[j] = dc * f;
        }
        let x = &trace.xs[t * inp..(t + 1) * inp];
        let dx = &mut dxs[t * inp..(t + 1) * inp];
        dh_next.fill(T::zero());
        let (dwxd, dwhd, dbd) = (dwx.data_mut(), dwh.data_mut(), db.data_mut());
        for r in 0..4 * hn {
            let d = dz[r];
            dbd[r] += d;
            let (rx, drx) = (&wxd[r * inp..(r + 1) * inp], &mut dwxd[r * inp..(r + 1) * inp]);
            for k in 0..inp {
                drx[k] += d * x[k];
                dx[k] += rx[k] * d;
            }
            let (rh, drh) = (&whd[r * hn..(r + 1) * hn], &mut dwhd[r * hn..(r + 1) * hn]);
            for k in 0..hn {
                drh[k] += d * h_prev[k];
                dh_next[k] += rh[k] * d;
            }
        }
    }
    Ok(dxs)
}

/// Max-subtracted softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Probabilities and `-ln p[class]`, computed through log-sum-exp.
pub fn softmax_xent<T: Scalar>(logits: &[T], class: usize) -> Result<(Vec<T>, T)> {
    if logits.len() < 2 {
        return Err(Error::shape("softmax needs at least two classes"));
    }
    if class >= logits.len() {
        return Err(Error::IndexOutOfRange {
            index: class,
            len: logits.len(),
        });
    }
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = m + logits.iter().map(|&z| (z - m).exp()).sum::<T>().ln();
    Ok((softmax(logits), lse - logits[class]))
}

/// Gradient of the cross-entropy w.r.t. the logits: `p - onehot(class)`.
pub fn softmax_xent_backward<T: Scalar>(probs: &[T], class: usize) -> Result<Vec<T>> {
    if class >= probs.len() {
        return Err(Error::IndexOutOfRange {
            index: class,
            len: probs.len(),
        });
    }
    let mut g = probs.to_vec();
    g[class] -= T::one();
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn rel(a: f64, n: f64) -> f64 {
        (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
    }

    /// Central difference of `f` w.r.t. every entry of `x`.
    fn numeric(x: &mut [f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
        let eps = 1e-5;
        (0..x.len())
            .map(|i| {
                let orig = x[i];
                x[i] = orig + eps;
                let up = f(x);
                x[i] = orig - eps;
                let down = f(x);
                x[i] = orig;
                (up - down) / (2.0 * eps)
            })
            .collect()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn embedding_examples() {
        let id = Tensor::<f64>::identity(4);
        assert_eq!(embed_forward(&id, 2).unwrap(), &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(embed_forward(&Tensor::<f64>::zeros(&[4, 3]), 1).unwrap(), &[0.0; 3]);
        assert!(embed_forward(&id, 4).is_err());
        let mut g = Tensor::<f64>::zeros(&[4, 2]);
        embed_backward(&mut g, 1, &[1.0, 2.0]).unwrap();
        embed_backward(&mut g, 1, &[1.0, 2.0]).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 2.0, 4.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(embed_backward(&mut g, 9, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn embedding_gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let table = rand_tensor(&mut rng, &[5, 3]);
        let up = rand_vec(&mut rng, 3);
        let mut g = Tensor::zeros(&[5, 3]);
        embed_backward(&mut g, 3, &up).unwrap();
        let mut flat = table.data().to_vec();
        let num = numeric(&mut flat, |v| dot(&v[9..12], &up));
        for (a, n) in g.data().iter().zip(&num) {
            assert!(rel(*a, *n) <= 1e-6);
        }
    }

    #[test]
    fn dense_examples() {
        let w = Tensor::<f64>::identity(2);
        let b = Tensor::zeros(&[2]);
        assert_eq!(dense_forward(&w, &b, &[-1.0, 2.0], Activation::Relu).unwrap(), vec![0.0, 2.0]);
        let w1 = Tensor::new(vec![1, 1], vec![1.0]).unwrap();
        let b1 = Tensor::zeros(&[1]);
        let y = dense_forward(&w1, &b1, &[0.0], Activation::Tanh).unwrap();
        assert_eq!(y, vec![0.0]);
        let (mut dw, mut db) = (Tensor::zeros(&[1, 1]), Tensor::zeros(&[1]));
        let dx = dense_backward(&w1, &[0.0], &y, &[1.0], Activation::Tanh, &mut dw, &mut db).unwrap();
        assert_eq!((dx[0], db.data()[0]), (1.0, 1.0));
        assert!(dense_forward(&w, &b, &[1.0], Activation::Relu).is_err());
        assert!(dense_forward(&w, &Tensor::zeros(&[3]), &[1.0, 1.0], Activation::Relu).is_err());
    }

    #[test]
    fn dense_gradients_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for act in [Activation::Relu, Activation::Tanh, Activation::Identity] {
            let w = rand_tensor(&mut rng, &[3, 4]);
            let b = rand_tensor(&mut rng, &[3]);
            let x = rand_vec(&mut rng, 4);
            let up = rand_vec(&mut rng, 3);
            let y = dense_forward(&w, &b, &x, act).unwrap();
            let (mut dw, mut db) = (Tensor::zeros(&[3, 4]), Tensor::zeros(&[3]));
            let dx = dense_backward(&w, &x, &y, &up, act, &mut dw, &mut db).unwrap();
            let loss = |w: &Tensor<f64>, b: &Tensor<f64>, x: &[f64]| dot(&dense_forward(w, b, x, act).unwrap(), &up);

            let mut wf = w.data().to_vec();
            let nw = numeric(&mut wf, |v| loss(&Tensor::new(vec![3, 4], v.to_vec()).unwrap(), &b, &x));
            let mut bf = b.data().to_vec();
            let nb = numeric(&mut bf, |v| loss(&w, &Tensor::from_vec(v.to_vec()), &x));
            let mut xf = x.clone();
            let nx = numeric(&mut xf, |v| loss(&w, &b, v));
            for (a, n) in dw.data().iter().zip(&nw).chain(db.data().iter().zip(&nb)).chain(dx.iter().zip(&nx)) {
                assert!(rel(*a, *n) <= 1e-6, "{act:?}: {a} vs {n}");
            }
        }
    }

    #[test]
    fn lstm_zero_parameters_stay_zero() {
        let (wx, wh, b) = (Tensor::<f64>::zeros(&[16, 3]), Tensor::zeros(&[16, 4]), Tensor::zeros(&[16]));
        let tr = lstm_forward(&wx, &wh, &b, &[0.7; 15], 5).unwrap();
        assert!(tr.hidden_states().iter().all(|&v| v == 0.0));
        assert!((0..5).all(|t| tr.c(t).iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn lstm_retains_memory_when_gates_saturate() {
        let h = 2;
        let wx = Tensor::<f64>::zeros(&[4 * h, 1]);
        let wh = Tensor::zeros(&[4 * h, h]);
        let mut b = Tensor::zeros(&[4 * h]);
        // input gate closed, forget gate open
        b.data_mut()[..h].fill(-50.0);
        b.data_mut()[h..2 * h].fill(50.0);
        let (_, c) = lstm_step(&[1.0], &[0.0, 0.0], &[1e3, -2e3], &wx, &wh, &b).unwrap();
        assert!((c[0] - 1e3).abs() < 1e-9 && (c[1] + 2e3).abs() < 1e-9);
        assert!(lstm_step(&[1.0, 2.0], &[0.0, 0.0], &[0.0, 0.0], &wx, &wh, &b).is_err());
        assert!(lstm_forward(&wx, &Tensor::zeros(&[4 * h, h + 1]), &b, &[0.0], 1).is_err());
    }

    #[test]
    fn lstm_step_agrees_with_sequence() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (wx, wh, b) = (rand_tensor(&mut rng, &[12, 2]), rand_tensor(&mut rng, &[12, 3]), rand_tensor(&mut rng, &[12]));
        let xs = rand_vec(&mut rng, 8);
        let tr = lstm_forward(&wx, &wh, &b, &xs, 4).unwrap();
        let (mut h, mut c) = (vec![0.0; 3], vec![0.0; 3]);
        for t in 0..4 {
            (h, c) = lstm_step(&xs[2 * t..2 * t + 2], &h, &c, &wx, &wh, &b).unwrap();
            assert_eq!(tr.h(t), &h[..]);
        }
    }

    #[test]
    fn lstm_gradients_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (inp, hn, steps) = (3, 4, 3);
        let wx = rand_tensor(&mut rng, &[4 * hn, inp]);
        let wh = rand_tensor(&mut rng, &[4 * hn, hn]);
        let b = rand_tensor(&mut rng, &[4 * hn]);
        let xs = rand_vec(&mut rng, steps * inp);
        let up = rand_vec(&mut rng, steps * hn);
        let loss = |wx: &Tensor<f64>, wh: &Tensor<f64>, b: &Tensor<f64>, xs: &[f64]| {
            dot(lstm_forward(wx, wh, b, xs, steps).unwrap().hidden_states(), &up)
        };
        let tr = lstm_forward(&wx, &wh, &b, &xs, steps).unwrap();
        let (mut dwx, mut dwh, mut db) = (Tensor::zeros(wx.shape()), Tensor::zeros(wh.shape()), Tensor::zeros(b.shape()));
        let dxs = lstm_backward(&wx, &wh, &tr, &up, &mut dwx, &mut dwh, &mut db).unwrap();

        let mut f = wx.data().to_vec();
        let n_wx = numeric(&mut f, |v| loss(&Tensor::new(wx.shape().to_vec(), v.to_vec()).unwrap(), &wh, &b, &xs));
        let mut f = wh.data().to_vec();
        let n_wh = numeric(&mut f, |v| loss(&wx, &Tensor::new(wh.shape().to_vec(), v.to_vec()).unwrap(), &b, &xs));
        let mut f = b.data().to_vec();
        let n_b = numeric(&mut f, |v| loss(&wx, &wh, &Tensor::from_vec(v.to_vec()), &xs));
        let mut f = xs.clone();
        let n_x = numeric(&mut f, |v| loss(&wx, &wh, &b, v));
        for (name, a, n) in [("wx", dwx.data(), &n_wx), ("wh", dwh.data(), &n_wh), ("b", db.data(), &n_b), ("x", &dxs[..], &n_x)] {
            for (a, n) in a.iter().zip(n) {
                assert!(rel(*a, *n) <= 1e-5, "{name}: {a} vs {n}");
            }
        }
    }

    #[test]
    fn softmax_examples() {
        let (p, l) = softmax_xent(&[0.0f64, 0.0, 0.0], 1).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert!((l - 3f64.ln()).abs() < 1e-12);
        let (p, l) = softmax_xent(&[1000.0f64, 0.0, 0.0], 0).unwrap();
        assert!(l.abs() < 1e-12 && p.iter().all(|v| v.is_finite()));
        let (_, l) = softmax_xent(&[1000.0f64, 0.0, 0.0], 1).unwrap();
        assert!((l - 1000.0).abs() < 1e-9);
        assert!(softmax_xent(&[0.0, 0.0], 2).is_err());
        assert!(softmax_xent(&[0.0], 0).is_err());
    }

    #[test]
    fn softmax_gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for class in 0..4 {
            let z = rand_vec(&mut rng, 4);
            let (p, _) = softmax_xent(&z, class).unwrap();
            let g = softmax_xent_backward(&p, class).unwrap();
            let mut f = z.clone();
            let n = numeric(&mut f, |v| softmax_xent(v, class).unwrap().1);
            for (a, n) in g.iter().zip(&n) {
                assert!((a - n).abs() <= 1e-7, "{a} vs {n}");
            }
        }
    }

    proptest! {
        #[test]
        fn softmax_is_a_simplex_point(z in proptest::collection::vec(-1e6f64..1e6, 2..8)) {
            let p = softmax(&z);
            prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}
