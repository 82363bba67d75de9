//! Fused single-direction LSTM with hand-written backpropagation through
//! time. Gate layout along the 4h axis is input, forget, cell, output.

use ndarray::{s, Array1, Axis};

use super::params::Matrix;

pub(crate) struct LstmCache {
    /// Activated gates per time step (n × 4h).
    gates: Matrix,
    cells: Matrix,
    tanh_cells: Matrix,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn order(n: usize, reverse: bool) -> impl DoubleEndedIterator<Item = usize> + Clone {
    (0..n).map(move |step| if reverse { n - 1 - step } else { step })
}

/// Run the LSTM over the rows of `x`. Output row `t` is the hidden state
/// after consuming row `t`; with `reverse` the rows are consumed last to
/// first.
pub(crate) fn forward(x: &Matrix, w_ih: &Matrix, w_hh: &Matrix, bias: &Matrix, reverse: bool) -> (Matrix, LstmCache) {
    let n = x.nrows();
    let h = w_hh.nrows();
    let pre = x.dot(w_ih) + bias;
    let mut out = Matrix::zeros((n, h));
    let mut gates = Matrix::zeros((n, 4 * h));
    let mut cells = Matrix::zeros((n, h));
    let mut tanh_cells = Matrix::zeros((n, h));
    let mut h_prev = Array1::<f64>::zeros(h);
    let mut c_prev = Array1::<f64>::zeros(h);

    for t in order(n, reverse) {
        let z = &pre.row(t) + &h_prev.dot(w_hh);
        let mut g_row = gates.row_mut(t);
        for k in 0..h {
            let i = sigmoid(z[k]);
            let f = sigmoid(z[h + k]);
            let g = z[2 * h + k].tanh();
            let o = sigmoid(z[3 * h + k]);
            let c = f * c_prev[k] + i * g;
            let tc = c.tanh();
            g_row[k] = i;
            g_row[h + k] = f;
            g_row[2 * h + k] = g;
            g_row[3 * h + k] = o;
            cells[[t, k]] = c;
            tanh_cells[[t, k]] = tc;
            out[[t, k]] = o * tc;
        }
        h_prev = out.row(t).to_owned();
        c_prev = cells.row(t).to_owned();
    }
    (
        out,
        LstmCache {
            gates,
            cells,
            tanh_cells,
        },
    )
}

pub(crate) struct LstmGrads {
    pub x: Matrix,
    pub w_ih: Matrix,
    pub w_hh: Matrix,
    pub bias: Matrix,
}

pub(crate) fn backward(
    g_out: &Matrix,
    x: &Matrix,
    w_ih: &Matrix,
    w_hh: &Matrix,
    out: &Matrix,
    cache: &LstmCache,
    reverse: bool,
) -> LstmGrads {
    let n = x.nrows();
    let h = w_hh.nrows();
    let mut dpre = Matrix::zeros((n, 4 * h));
    let mut h_prev_rows = Matrix::zeros((n, h));
    let mut dh_next = Array1::<f64>::zeros(h);
    let mut dc_next = Array1::<f64>::zeros(h);
    let steps: Vec<usize> = order(n, reverse).collect();

    for step in (0..n).rev() {
        let t = steps[step];
        let prev = step.checked_sub(1).map(|p| steps[p]);
        if let Some(p) = prev {
            h_prev_rows.row_mut(t).assign(&out.row(p));
        }
        let gates = cache.gates.row(t);
        let mut dz = dpre.row_mut(t);
        for k in 0..h {
            let i = gates[k];
            let f = gates[h + k];
            let g = gates[2 * h + k];
            let o = gates[3 * h + k];
            let tc = cache.tanh_cells[[t, k]];
            let c_prev = prev.map_or(0.0, |p| cache.cells[[p, k]]);
            let dh = g_out[[t, k]] + dh_next[k];
            let d_o = dh * tc;
            let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
            dz[k] = dc * g * i * (1.0 - i);
            dz[h + k] = dc * c_prev * f * (1.0 - f);
            dz[2 * h + k] = dc * i * (1.0 - g * g);
            dz[3 * h + k] = d_o * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        dh_next = w_hh.dot(&dpre.row(t));
    }

    LstmGrads {
        x: dpre.dot(&w_ih.t()),
        w_ih: x.t().dot(&dpre),
        w_hh: h_prev_rows.t().dot(&dpre),
        bias: dpre.sum_axis(Axis(0)).insert_axis(Axis(0)),
    }
}

/// Forget-gate bias slice, for initialisation.
pub(crate) fn forget_bias_mut(bias: &mut Matrix) -> ndarray::ArrayViewMut2<'_, f64> {
    let h = bias.ncols() / 4;
    bias.slice_mut(s![.., h..2 * h])
}
