//! Forward and backward kernels.
//!
//! Backward functions that touch parameters accumulate into the gradient
//! tensors they are given (`+=`), so several examples can share one
//! accumulator before an optimizer step.

use super::{RngState, Tensor};
use crate::error::{Error, Result};

/// Probabilities are clamped to this floor before taking the log.
pub const PROB_FLOOR: f64 = 1e-15;

fn expect_rank(t: &Tensor, rank: usize, what: &str) -> Result<()> {
    if t.rank() != rank {
        return Err(Error::Shape(format!(
            "{what}: expected rank {rank}, got shape {:?}",
            t.shape()
        )));
    }
    Ok(())
}

pub fn relu(x: &Tensor) -> Tensor {
    let data = x
        .data()
        .iter()
        .map(|&z| if z > 0.0 { z } else { 0.0 })
        .collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

/// Passes `dy` where the forward input was strictly positive.
pub fn relu_backward(x: &Tensor, dy: &Tensor) -> Tensor {
    assert_eq!(x.shape(), dy.shape(), "relu_backward shapes");
    let data = x
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&z, &g)| if z > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

/// Numerically stable softmax of a rank-1 tensor.
pub fn softmax(z: &Tensor) -> Result<Tensor> {
    expect_rank(z, 1, "softmax")?;
    let max = z.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.data().iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(Tensor::vector(exps.into_iter().map(|e| e / sum).collect()))
}

/// `dz = y * (dy - <dy, y>)` given the softmax output `y`.
pub fn softmax_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    assert_eq!(y.shape(), dy.shape(), "softmax_backward shapes");
    let dot: f64 = y.data().iter().zip(dy.data()).map(|(a, b)| a * b).sum();
    Tensor::vector(
        y.data()
            .iter()
            .zip(dy.data())
            .map(|(&yi, &gi)| yi * (gi - dot))
            .collect(),
    )
}

/// `y = x W + b` for `x: [n_in]`, `W: [n_in, n_out]`, `b: [n_out]`.
pub fn dense(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    expect_rank(x, 1, "dense input")?;
    expect_rank(w, 2, "dense weight")?;
    let (n_in, n_out) = (w.shape()[0], w.shape()[1]);
    if x.len() != n_in || b.shape() != [n_out] {
        return Err(Error::Shape(format!(
            "dense: input {:?}, weight {:?}, bias {:?}",
            x.shape(),
            w.shape(),
            b.shape()
        )));
    }
    let mut y = b.data().to_vec();
    for (i, &xi) in x.data().iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = w.row(i);
        for (yo, &wo) in y.iter_mut().zip(row) {
            *yo += xi * wo;
        }
    }
    Ok(Tensor::vector(y))
}

/// Accumulates `dW += x^T dy`, `db += dy` and returns `dx = W dy`.
pub fn dense_backward(
    x: &Tensor,
    w: &Tensor,
    dy: &Tensor,
    dw: &mut Tensor,
    db: &mut Tensor,
) -> Tensor {
    let n_out = w.shape()[1];
    assert_eq!(dy.len(), n_out, "dense_backward upstream length");
    for (d, &g) in db.data_mut().iter_mut().zip(dy.data()) {
        *d += g;
    }
    let dwd = dw.data_mut();
    let mut dx = vec![0.0; x.len()];
    for (i, &xi) in x.data().iter().enumerate() {
        let wrow = w.row(i);
        dx[i] = wrow.iter().zip(dy.data()).map(|(a, b)| a * b).sum();
        if xi == 0.0 {
            continue;
        }
        let drow = &mut dwd[i * n_out..(i + 1) * n_out];
        for (d, &g) in drow.iter_mut().zip(dy.data()) {
            *d += xi * g;
        }
    }
    Tensor::vector(dx)
}

fn conv_dims(x: &Tensor, filters: &Tensor) -> Result<(usize, usize, usize, usize)> {
    expect_rank(x, 2, "conv_text input")?;
    expect_rank(filters, 3, "conv_text filters")?;
    let (len, dim) = (x.shape()[0], x.shape()[1]);
    let (k, fdim, n_filters) = (filters.shape()[0], filters.shape()[1], filters.shape()[2]);
    if fdim != dim {
        return Err(Error::Shape(format!(
            "conv_text: input width {dim} but filters span {fdim}"
        )));
    }
    if len < k {
        return Err(Error::Shape(format!(
            "conv_text: sequence length {len} shorter than filter width {k}"
        )));
    }
    Ok((len, dim, k, n_filters))
}

/// Full-width text convolution: a `k`-row window slides along the sequence
/// and each filter spans the whole embedding dimension.
///
/// `out[t, f] = sum_{i<k, j<d} x[t+i, j] * filters[i, j, f] + bias[f]`.
/// No activation is applied here.
pub fn conv_text(x: &Tensor, filters: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (len, dim, k, nf) = conv_dims(x, filters)?;
    if bias.shape() != [nf] {
        return Err(Error::Shape(format!(
            "conv_text: bias {:?} for {nf} filters",
            bias.shape()
        )));
    }
    let positions = len - k + 1;
    let xd = x.data();
    let fd = filters.data();
    let nonzero: Vec<bool> = (0..len)
        .map(|r| xd[r * dim..(r + 1) * dim].iter().any(|&v| v != 0.0))
        .collect();
    let mut out = Vec::with_capacity(positions * nf);
    for t in 0..positions {
        let mut acc = bias.data().to_vec();
        for i in 0..k {
            if !nonzero[t + i] {
                continue;
            }
            let row = &xd[(t + i) * dim..(t + i + 1) * dim];
            for (j, &v) in row.iter().enumerate() {
                let w = &fd[(i * dim + j) * nf..(i * dim + j + 1) * nf];
                for (a, &wf) in acc.iter_mut().zip(w) {
                    *a += v * wf;
                }
            }
        }
        out.extend_from_slice(&acc);
    }
    Tensor::new(vec![positions, nf], out)
}

/// Accumulates filter and bias gradients; returns `dx` when requested.
pub fn conv_text_backward(
    x: &Tensor,
    filters: &Tensor,
    dy: &Tensor,
    dfilters: &mut Tensor,
    dbias: &mut Tensor,
    want_dx: bool,
) -> Option<Tensor> {
    let (len, dim, k, nf) = conv_dims(x, filters).expect("shapes checked in forward");
    let positions = len - k + 1;
    assert_eq!(
        dy.shape(),
        [positions, nf],
        "conv_text_backward upstream shape"
    );
    let xd = x.data();
    let fd = filters.data();
    let dyd = dy.data();
    let dfd = dfilters.data_mut();
    let mut dx = want_dx.then(|| vec![0.0; len * dim]);

    for t in 0..positions {
        let g = &dyd[t * nf..(t + 1) * nf];
        if g.iter().all(|&v| v == 0.0) {
            continue;
        }
        for (d, &gv) in dbias.data_mut().iter_mut().zip(g) {
            *d += gv;
        }
        for i in 0..k {
            let r = t + i;
            let row = &xd[r * dim..(r + 1) * dim];
            for (j, &v) in row.iter().enumerate() {
                let base = (i * dim + j) * nf;
                if v != 0.0 {
                    for (d, &gv) in dfd[base..base + nf].iter_mut().zip(g) {
                        *d += v * gv;
                    }
                }
                if let Some(dx) = dx.as_mut() {
                    let w = &fd[base..base + nf];
                    dx[r * dim + j] += w.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
    }
    dx.map(|d| Tensor::matrix(len, dim, d))
}

/// Result of a max-over-time pool: the per-column maxima and the row that
/// produced each one.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxPool {
    pub output: Tensor,
    pub argmax: Vec<usize>,
    pub rows: usize,
}

/// `out[f] = max_t x[t, f]`; ties resolve to the earliest row.
pub fn maxpool_over_time(x: &Tensor) -> Result<MaxPool> {
    expect_rank(x, 2, "maxpool_over_time")?;
    let (rows, cols) = (x.shape()[0], x.shape()[1]);
    let mut best = x.row(0).to_vec();
    let mut argmax = vec![0; cols];
    for t in 1..rows {
        for (f, &v) in x.row(t).iter().enumerate() {
            if v > best[f] {
                best[f] = v;
                argmax[f] = t;
            }
        }
    }
    Ok(MaxPool {
        output: Tensor::vector(best),
        argmax,
        rows,
    })
}

pub fn maxpool_backward(pool: &MaxPool, dy: &Tensor) -> Tensor {
    let cols = pool.argmax.len();
    assert_eq!(dy.len(), cols, "maxpool_backward upstream length");
    let mut dx = vec![0.0; pool.rows * cols];
    for (f, (&t, &g)) in pool.argmax.iter().zip(dy.data()).enumerate() {
        dx[t * cols + f] = g;
    }
    Tensor::matrix(pool.rows, cols, dx)
}

/// Inverted dropout. Returns the output and the multiplier mask (`0` or
/// `1 / (1 - rate)`), or `None` when the layer is the identity.
pub fn dropout(
    x: &Tensor,
    rate: f64,
    rng: &mut RngState,
    training: bool,
) -> Result<(Tensor, Option<Vec<f64>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidConfig(format!(
            "dropout rate {rate} outside [0, 1)"
        )));
    }
    if !training || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..x.len())
        .map(|_| if rng.bernoulli(rate) { 0.0 } else { keep })
        .collect();
    let data = x.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
    Ok((Tensor::new(x.shape().to_vec(), data)?, Some(mask)))
}

pub fn dropout_backward(mask: Option<&[f64]>, dy: &Tensor) -> Tensor {
    match mask {
        None => dy.clone(),
        Some(mask) => {
            let data = dy.data().iter().zip(mask).map(|(g, m)| g * m).collect();
            Tensor::new(dy.shape().to_vec(), data).expect("same shape")
        }
    }
}

pub fn concat(xs: &[&Tensor]) -> Result<Tensor> {
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut data = Vec::with_capacity(xs.iter().map(|t| t.len()).sum());
    for t in xs {
        expect_rank(t, 1, "concat")?;
        data.extend_from_slice(t.data());
    }
    Ok(Tensor::vector(data))
}

/// Split an upstream gradient back into segments of the given lengths.
pub fn concat_backward(dy: &Tensor, lengths: &[usize]) -> Vec<Tensor> {
    assert_eq!(
        dy.len(),
        lengths.iter().sum::<usize>(),
        "concat_backward lengths"
    );
    let mut out = Vec::with_capacity(lengths.len());
    let mut at = 0;
    for &n in lengths {
        out.push(Tensor::vector(dy.data()[at..at + n].to_vec()));
        at += n;
    }
    out
}

/// `-ln(probs[label])`, with the probability clamped to [`PROB_FLOOR`].
pub fn sparse_ce_loss(probs: &Tensor, label: usize) -> Result<f64> {
    if label >= probs.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: probs.len(),
        });
    }
    Ok(-probs.data()[label].clamp(PROB_FLOOR, 1.0).ln())
}

/// Gradient of softmax followed by cross-entropy with respect to the logits:
/// `probs - onehot(label)`.
pub fn softmax_ce_backward(probs: &Tensor, label: usize) -> Result<Tensor> {
    if label >= probs.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: probs.len(),
        });
    }
    let mut d = probs.data().to_vec();
    d[label] -= 1.0;
    Ok(Tensor::vector(d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::gradcheck::gradient_check;

    fn random(shape: &[usize], rng: &mut RngState) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(
            shape.to_vec(),
            (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        )
        .unwrap()
    }

    fn dot(a: &Tensor, b: &[f64]) -> f64 {
        a.data().iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn relu_examples() {
        let y = relu(&Tensor::vector(vec![2.0, -1.0, 0.0]));
        assert_eq!(y.data(), &[2.0, 0.0, 0.0]);
        let y = relu(&Tensor::vector(vec![-3.0, -0.5]));
        assert_eq!(y.data(), &[0.0, 0.0]);
        let g = relu_backward(
            &Tensor::vector(vec![2.0, -1.0, 0.0]),
            &Tensor::vector(vec![1.0; 3]),
        );
        assert_eq!(g.data(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn softmax_examples() {
        let y = softmax(&Tensor::vector(vec![0.0, 0.0])).unwrap();
        assert_eq!(y.data(), &[0.5, 0.5]);
        // exp(k - 3) / (e^-2 + e^-1 + 1) evaluated independently
        let y = softmax(&Tensor::vector(vec![1.0, 2.0, 3.0])).unwrap();
        let expected = [0.09003057317038046, 0.24472847105479767, 0.6652409557748219];
        for (a, b) in y.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        for c in [-700.0, 0.0, 3.5, 900.0] {
            let y = softmax(&Tensor::vector(vec![c; 3])).unwrap();
            for v in y.data() {
                assert!((v - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        assert!(softmax(&Tensor::zeros(&[2, 2])).is_err());
    }

    #[test]
    fn dense_examples() {
        let x = Tensor::vector(vec![1.0, 2.0]);
        let eye = Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let y = dense(&x, &eye, &Tensor::vector(vec![3.0, 4.0])).unwrap();
        assert_eq!(y.data(), &[4.0, 6.0]);
        let y = dense(&x, &eye, &Tensor::zeros(&[2])).unwrap();
        assert_eq!(y.data(), x.data());
        assert!(dense(&Tensor::vector(vec![1.0; 3]), &eye, &Tensor::zeros(&[2])).is_err());
    }

    #[test]
    fn conv_examples() {
        let x = Tensor::matrix(4, 3, vec![1.0; 12]);
        let f = Tensor::new(vec![2, 3, 1], vec![1.0; 6]).unwrap();
        let y = conv_text(&x, &f, &Tensor::zeros(&[1])).unwrap();
        assert_eq!(y.shape(), &[3, 1]);
        assert_eq!(y.data(), &[6.0, 6.0, 6.0]);

        let f4 = Tensor::new(vec![4, 3, 2], vec![0.5; 24]).unwrap();
        let y = conv_text(&x, &f4, &Tensor::vector(vec![1.0, -1.0])).unwrap();
        assert_eq!(y.shape(), &[1, 2]);
        assert_eq!(y.data(), &[7.0, 5.0]);

        let f5 = Tensor::new(vec![5, 3, 1], vec![1.0; 15]).unwrap();
        assert!(conv_text(&x, &f5, &Tensor::zeros(&[1])).is_err());
    }

    #[test]
    fn maxpool_examples() {
        let p = maxpool_over_time(&Tensor::matrix(3, 1, vec![1.0, 5.0, 3.0])).unwrap();
        assert_eq!(p.output.data(), &[5.0]);
        assert_eq!(p.argmax, vec![1]);
        let p = maxpool_over_time(&Tensor::matrix(3, 1, vec![2.0, 2.0, 2.0])).unwrap();
        assert_eq!(p.output.data(), &[2.0]);
        let g = maxpool_backward(&p, &Tensor::vector(vec![1.5]));
        assert_eq!(g.data(), &[1.5, 0.0, 0.0]);
    }

    #[test]
    fn dropout_examples() {
        let mut rng = RngState::new(9);
        let x = Tensor::vector(vec![0.3, -2.0, 5.0]);
        let (y, m) = dropout(&x, 0.5, &mut rng, false).unwrap();
        assert_eq!((y, m), (x.clone(), None));
        let (y, m) = dropout(&x, 0.0, &mut rng, true).unwrap();
        assert_eq!((y, m), (x.clone(), None));
        assert!(dropout(&x, 1.0, &mut rng, true).is_err());

        let ones = Tensor::vector(vec![1.0; 10_000]);
        let (y, mask) = dropout(&ones, 0.2, &mut rng, true).unwrap();
        let mean = y.data().iter().sum::<f64>() / 10_000.0;
        assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
        let mask = mask.unwrap();
        assert!(mask.iter().all(|&m| m == 0.0 || m == 1.25));
        let g = dropout_backward(Some(&mask), &ones);
        assert_eq!(g, y);
    }

    #[test]
    fn concat_examples() {
        let a = Tensor::vector(vec![1.0, 2.0]);
        let b = Tensor::vector(vec![3.0]);
        assert_eq!(concat(&[&a, &b]).unwrap().data(), &[1.0, 2.0, 3.0]);
        assert_eq!(concat(&[&a]).unwrap(), a);
        assert!(concat(&[]).is_err());
        let parts = concat_backward(&Tensor::vector(vec![7.0, 8.0, 9.0]), &[2, 1]);
        assert_eq!(parts[0].data(), &[7.0, 8.0]);
        assert_eq!(parts[1].data(), &[9.0]);
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(
            sparse_ce_loss(&Tensor::vector(vec![1.0, 0.0]), 0).unwrap(),
            0.0
        );
        let l = sparse_ce_loss(&Tensor::vector(vec![0.5, 0.5]), 1).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(sparse_ce_loss(&Tensor::vector(vec![0.5, 0.5]), 2).is_err());
        // probability 0 is clamped rather than producing infinity
        assert!(sparse_ce_loss(&Tensor::vector(vec![1.0, 0.0]), 1)
            .unwrap()
            .is_finite());

        let p = softmax(&Tensor::vector(vec![1.0, 2.0, 3.0])).unwrap();
        let g = softmax_ce_backward(&p, 0).unwrap();
        let expected = [
            0.09003057317038046 - 1.0,
            0.24472847105479767,
            0.6652409557748219,
        ];
        for (a, b) in g.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    // Each check below compares the analytic backward pass to central
    // differences of a scalar probe `L = <r, op(x)>` with random `r`.

    #[test]
    fn dense_gradients_match_finite_differences() {
        let mut rng = RngState::new(11);
        let (x, w, b) = (
            random(&[3], &mut rng),
            random(&[3, 4], &mut rng),
            random(&[4], &mut rng),
        );
        let r: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let mut dw = Tensor::zeros(&[3, 4]);
        let mut db = Tensor::zeros(&[4]);
        let dx = dense_backward(&x, &w, &Tensor::vector(r.clone()), &mut dw, &mut db);

        let probe = |xv: &[f64], wv: &[f64], bv: &[f64]| {
            let y = dense(
                &Tensor::vector(xv.to_vec()),
                &Tensor::matrix(3, 4, wv.to_vec()),
                &Tensor::vector(bv.to_vec()),
            )
            .unwrap();
            dot(&y, &r)
        };
        let mut xs = x.data().to_vec();
        let e = gradient_check(|p| probe(p, w.data(), b.data()), &mut xs, dx.data(), 1e-5);
        assert!(e.max_rel_error < 1e-6, "{e:?}");
        let mut ws = w.data().to_vec();
        let e = gradient_check(|p| probe(x.data(), p, b.data()), &mut ws, dw.data(), 1e-5);
        assert!(e.max_rel_error < 1e-6, "{e:?}");
        let mut bs = b.data().to_vec();
        let e = gradient_check(|p| probe(x.data(), w.data(), p), &mut bs, db.data(), 1e-5);
        assert!(e.max_rel_error < 1e-6, "{e:?}");
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut rng = RngState::new(12);
        let (x, f, b) = (
            random(&[6, 5], &mut rng),
            random(&[3, 5, 2], &mut rng),
            random(&[2], &mut rng),
        );
        let r: Vec<f64> = (0..8).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let mut df = Tensor::zeros(&[3, 5, 2]);
        let mut db = Tensor::zeros(&[2]);
        let dx = conv_text_backward(
            &x,
            &f,
            &Tensor::matrix(4, 2, r.clone()),
            &mut df,
            &mut db,
            true,
        )
        .unwrap();
        let probe = |xv: &[f64], fv: &[f64], bv: &[f64]| {
            let y = conv_text(
                &Tensor::matrix(6, 5, xv.to_vec()),
                &Tensor::new(vec![3, 5, 2], fv.to_vec()).unwrap(),
                &Tensor::vector(bv.to_vec()),
            )
            .unwrap();
            dot(&y, &r)
        };
        let mut xs = x.data().to_vec();
        let e = gradient_check(|p| probe(p, f.data(), b.data()), &mut xs, dx.data(), 1e-5);
        assert!(e.max_rel_error < 1e-6, "{e:?}");
        let mut fs = f.data().to_vec();
        let e = gradient_check(|p| probe(x.data(), p, b.data()), &mut fs, df.data(), 1e-5);
        assert!(e.max_rel_error < 1e-6, "{e:?}");
        let mut bs = b.data().to_vec();
        let e = gradient_check(|p| probe(x.data(), f.data(), p), &mut bs, db.data(), 1e-5);
        assert!(e.max_rel_error < 1e-6, "{e:?}");
    }

    #[test]
    fn maxpool_gradient_matches_finite_differences() {
        let mut rng = RngState::new(13);
        let x = random(&[7, 4], &mut rng);
        let r: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let pool = maxpool_over_time(&x).unwrap();
        let dx = maxpool_backward(&pool, &Tensor::vector(r.clone()));
        let mut xs = x.data().to_vec();
        let e = gradient_check(
            |p| {
                dot(
                    &maxpool_over_time(&Tensor::matrix(7, 4, p.to_vec()))
                        .unwrap()
                        .output,
                    &r,
                )
            },
            &mut xs,
            dx.data(),
            1e-5,
        );
        assert!(e.max_rel_error < 1e-6, "{e:?}");
    }

    #[test]
    fn softmax_ce_gradient_matches_finite_differences() {
        let mut rng = RngState::new(14);
        for label in 0..3 {
            let z = random(&[3], &mut rng);
            let p = softmax(&z).unwrap();
            let g = softmax_ce_backward(&p, label).unwrap();
            let mut zs = z.data().to_vec();
            let e = gradient_check(
                |v| sparse_ce_loss(&softmax(&Tensor::vector(v.to_vec())).unwrap(), label).unwrap(),
                &mut zs,
                g.data(),
                1e-5,
            );
            assert!(e.max_rel_error < 1e-6, "{e:?}");

            let r: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let g = softmax_backward(&p, &Tensor::vector(r.clone()));
            let e = gradient_check(
                |v| dot(&softmax(&Tensor::vector(v.to_vec())).unwrap(), &r),
                &mut zs,
                g.data(),
                1e-5,
            );
            assert!(e.max_rel_error < 1e-6, "{e:?}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn softmax_sums_to_one_and_is_shift_invariant(
                z in proptest::collection::vec(-500.0f64..500.0, 1..12),
                c in -100.0f64..100.0,
            ) {
                let y = softmax(&Tensor::vector(z.clone())).unwrap();
                let sum: f64 = y.data().iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-12);
                prop_assert!(y.data().iter().all(|&p| p >= 0.0));
                let shifted = softmax(&Tensor::vector(z.iter().map(|v| v + c).collect())).unwrap();
                prop_assert!(y.max_abs_diff(&shifted) <= 1e-12);
            }

            #[test]
            fn relu_is_idempotent_and_nonnegative(x in proptest::collection::vec(-1e6f64..1e6, 1..50)) {
                let t = Tensor::vector(x);
                let y = relu(&t);
                prop_assert!(y.data().iter().all(|&v| v >= 0.0));
                prop_assert_eq!(relu(&y), y);
            }

            #[test]
            fn maxpool_is_row_permutation_invariant(seed in any::<u64>(), rows in 1usize..8, cols in 1usize..5) {
                let mut rng = RngState::new(seed);
                let x = random(&[rows, cols], &mut rng);
                let mut order: Vec<usize> = (0..rows).collect();
                rng.shuffle(&mut order);
                let permuted: Vec<f64> = order.iter().flat_map(|&r| x.row(r).to_vec()).collect();
                let a = maxpool_over_time(&x).unwrap().output;
                let b = maxpool_over_time(&Tensor::matrix(rows, cols, permuted)).unwrap().output;
                prop_assert_eq!(a, b);
            }

            #[test]
            fn conv_is_translation_equivariant(seed in any::<u64>(), k in 1usize..4, shift in 0usize..4) {
                // The same k-row window placed at two offsets yields the same output row.
                let mut rng = RngState::new(seed);
                let dim = 3;
                let len = 2 * k + shift + 1;
                let window = random(&[k, dim], &mut rng);
                let mut x = random(&[len, dim], &mut rng).into_data();
                let a = 0;
                let b = k + shift;
                for i in 0..k {
                    for j in 0..dim {
                        x[(a + i) * dim + j] = window.row(i)[j];
                        x[(b + i) * dim + j] = window.row(i)[j];
                    }
                }
                let f = random(&[k, dim, 2], &mut rng);
                let bias = random(&[2], &mut rng);
                let y = conv_text(&Tensor::matrix(len, dim, x), &f, &bias).unwrap();
                prop_assert_eq!(y.row(a), y.row(b));
            }
        }
    }
}
