//! Derivative-free simplex minimization.

#[derive(Debug, Clone, Copy)]
pub(crate) struct SimplexOutcome<const N: usize> {
    pub x: [f64; N],
    pub f: f64,
    pub evals: usize,
    #[cfg_attr(not(test), allow(dead_code))]
    pub converged: bool,
}

/// Nelder–Mead with standard coefficients (reflection 1, expansion 2,
/// contraction ½, shrink ½). Stops once every vertex lies within `xtol`
/// (max-norm) of the best vertex, or after `max_evals` evaluations.
pub(crate) fn nelder_mead<const N: usize, F>(
    mut f: F,
    x0: [f64; N],
    step: f64,
    xtol: f64,
    max_evals: usize,
) -> SimplexOutcome<N>
where
    F: FnMut(&[f64; N]) -> f64,
{
    let mut evals = 0usize;
    let mut eval = |x: &[f64; N], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut pts: Vec<[f64; N]> = Vec::with_capacity(N + 1);
    pts.push(x0);
    for i in 0..N {
        let mut p = x0;
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p, &mut evals)).collect();

    let mut converged = false;
    loop {
        // order: best first
        let mut idx: Vec<usize> = (0..=N).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = idx.iter().map(|&i| pts[i]).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();

        let spread = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(pts[0].iter()).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread < xtol {
            converged = true;
            break;
        }
        if evals >= max_evals {
            break;
        }

        let mut centroid = [0.0; N];
        for p in &pts[..N] {
            for i in 0..N {
                centroid[i] += p[i] / N as f64;
            }
        }
        let along = |t: f64| -> [f64; N] {
            let mut q = [0.0; N];
            for i in 0..N {
                q[i] = centroid[i] + t * (pts[N][i] - centroid[i]);
            }
            q
        };

        let xr = along(-1.0);
        let fr = eval(&xr, &mut evals);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                pts[N] = xe;
                vals[N] = fe;
            } else {
                pts[N] = xr;
                vals[N] = fr;
            }
            continue;
        }
        if fr < vals[N - 1] {
            pts[N] = xr;
            vals[N] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[N] {
            let xc = along(-0.5);
            (xc, eval(&xc, &mut evals))
        } else {
            let xc = along(0.5);
            (xc, eval(&xc, &mut evals))
        };
        if fc < vals[N].min(fr) {
            pts[N] = xc;
            vals[N] = fc;
            continue;
        }
        // shrink toward the best vertex
        for k in 1..=N {
            for i in 0..N {
                pts[k][i] = pts[0][i] + 0.5 * (pts[k][i] - pts[0][i]);
            }
            vals[k] = eval(&pts[k], &mut evals);
        }
    }

    SimplexOutcome {
        x: pts[0],
        f: vals[0],
        evals,
        converged,
    }
}
