//! Pseudo-spectral reference solution of `u_t + u u_x + ν u_xxx = 0` on the
//! periodic interval `[-1, 1)`.
//!
//! Fourier collocation in space; the stiff dispersive term is integrated
//! exactly through an integrating factor and the nonlinear term with
//! classical RK4.

use std::f64::consts::PI;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{config, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdvParams {
    pub modes: usize,
    pub dt: f64,
    pub nu: f64,
    pub t_end: f64,
    /// Output nodes in x, both endpoints included.
    pub nx: usize,
    /// Output nodes in t, both endpoints included.
    pub nt: usize,
}

impl Default for KdvParams {
    fn default() -> Self {
        KdvParams {
            modes: 512,
            dt: 2.5e-4,
            nu: 5e-4,
            t_end: 1.25,
            nx: 257,
            nt: 251,
        }
    }
}

impl KdvParams {
    fn refined(&self) -> Self {
        KdvParams {
            modes: 2 * self.modes,
            dt: 0.5 * self.dt,
            ..*self
        }
    }

    fn validate(&self) -> Result<(usize, usize)> {
        if self.nx < 2 || self.nt < 2 || self.modes < 4 {
            return config("reference grid too small");
        }
        if self.modes % (self.nx - 1) != 0 {
            return config(format!(
                "{} modes do not contain the {} output nodes",
                self.modes, self.nx
            ));
        }
        let frame = self.t_end / (self.nt - 1) as f64;
        let steps = (frame / self.dt).round();
        if steps < 1.0 || ((steps * self.dt - frame) / frame).abs() > 1e-9 {
            return config(format!("dt {} does not divide the output interval {frame}", self.dt));
        }
        Ok((self.modes / (self.nx - 1), steps as usize))
    }

    fn header(&self) -> String {
        format!(
            "# kdv-reference modes={} dt={:e} nu={:e} t_end={:e} nx={} nt={}",
            self.modes, self.dt, self.nu, self.t_end, self.nx, self.nt
        )
    }
}

/// Field on the output grid, `u[it * nx + ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KdvTable {
    pub params: KdvParams,
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub u: Vec<f64>,
}

impl KdvTable {
    pub fn at(&self, ix: usize, it: usize) -> f64 {
        self.u[it * self.params.nx + ix]
    }

    /// `∫u dx` over one period at output time `it` (the duplicated endpoint
    /// is skipped, which makes the rectangle rule spectrally accurate).
    pub fn mass(&self, it: usize) -> f64 {
        let nx = self.params.nx;
        let h = 2.0 / (nx - 1) as f64;
        self.u[it * nx..it * nx + nx - 1].iter().sum::<f64>() * h
    }

    pub fn rms_difference(&self, other: &KdvTable) -> f64 {
        let n = self.u.len().min(other.u.len());
        (self.u.iter().zip(&other.u).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64).sqrt()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut w = BufWriter::new(fs::File::create(path)?);
        writeln!(w, "{}", self.params.header())?;
        writeln!(w, "x,t,u")?;
        for (it, t) in self.t.iter().enumerate() {
            for (ix, x) in self.x.iter().enumerate() {
                writeln!(w, "{x},{t},{}", self.at(ix, it))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Loads a cached table; `Ok(None)` if the header does not match `params`.
    pub fn read_csv(path: &Path, params: &KdvParams) -> Result<Option<Self>> {
        let mut lines = BufReader::new(fs::File::open(path)?).lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != params.header() {
            return Ok(None);
        }
        lines.next();
        let mut u = Vec::with_capacity(params.nx * params.nt);
        for line in lines {
            let line = line?;
            let value = line
                .rsplit(',')
                .next()
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Parse(format!("bad reference row {line:?}")))?;
            u.push(value);
        }
        if u.len() != params.nx * params.nt {
            return Ok(None);
        }
        Ok(Some(KdvTable {
            params: *params,
            x: grid(-1.0, 1.0, params.nx),
            t: grid(0.0, params.t_end, params.nt),
            u,
        }))
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Integrates from `cos(πx)` without the refinement check.
pub fn solve(params: &KdvParams) -> Result<KdvTable> {
    let (stride, steps) = params.validate()?;
    let n = params.modes;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let scale = 1.0 / n as f64;

    // angular wavenumbers for period 2; Nyquist dropped from odd derivatives
    let k: Vec<f64> = (0..n)
        .map(|m| {
            let m = if m < n / 2 {
                m as f64
            } else if m == n / 2 {
                0.0
            } else {
                m as f64 - n as f64
            };
            PI * m
        })
        .collect();
    let dt = params.dt;
    let lin: Vec<Complex64> = k.iter().map(|k| Complex64::new(0.0, params.nu * k * k * k)).collect();
    let e1: Vec<Complex64> = lin.iter().map(|l| (l * (0.5 * dt)).exp()).collect();
    let e2: Vec<Complex64> = e1.iter().map(|e| e * e).collect();
    let g: Vec<Complex64> = k.iter().map(|k| Complex64::new(0.0, -0.5 * dt * k)).collect();

    let xs: Vec<f64> = (0..n).map(|j| -1.0 + 2.0 * j as f64 / n as f64).collect();
    let mut v: Vec<Complex64> = xs.iter().map(|x| Complex64::new((PI * x).cos(), 0.0)).collect();
    fwd.process(&mut v);

    let mut buf = vec![Complex64::default(); n];
    // g · FFT(ifft(w)²)
    let mut nonlinear = |w: &[Complex64], out: &mut Vec<Complex64>| {
        buf.copy_from_slice(w);
        inv.process(&mut buf);
        for z in buf.iter_mut() {
            let r = z.re * scale;
            *z = Complex64::new(r * r, 0.0);
        }
        fwd.process(&mut buf);
        out.clear();
        out.extend(buf.iter().zip(&g).map(|(b, g)| b * g));
    };

    let mut frames = Vec::with_capacity(params.nx * params.nt);
    let mut physical = vec![Complex64::default(); n];
    let mut record = |v: &[Complex64], frames: &mut Vec<f64>| {
        physical.copy_from_slice(v);
        inv.process(&mut physical);
        for ix in 0..params.nx {
            let j = (ix * stride) % n;
            frames.push(physical[j].re * scale);
        }
    };
    record(&v, &mut frames);

    let (mut a, mut b, mut c, mut d) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut tmp = vec![Complex64::default(); n];
    for _ in 1..params.nt {
        for _ in 0..steps {
            nonlinear(&v, &mut a);
            for i in 0..n {
                tmp[i] = e1[i] * (v[i] + a[i] * 0.5);
            }
            nonlinear(&tmp, &mut b);
            for i in 0..n {
                tmp[i] = e1[i] * v[i] + b[i] * 0.5;
            }
            nonlinear(&tmp, &mut c);
            for i in 0..n {
                tmp[i] = e2[i] * v[i] + e1[i] * c[i];
            }
            nonlinear(&tmp, &mut d);
            for i in 0..n {
                v[i] = e2[i] * v[i] + (e2[i] * a[i] + e1[i] * (b[i] + c[i]) * 2.0 + d[i]) / 6.0;
            }
        }
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Oracle("spectral integration blew up".into()));
        }
        record(&v, &mut frames);
    }

    Ok(KdvTable {
        params: *params,
        x: grid(-1.0, 1.0, params.nx),
        t: grid(0.0, params.t_end, params.nt),
        u: frames,
    })
}

/// RMS change allowed between a solve and its refinement.
pub const CONVERGENCE_TOL: f64 = 1e-6;

/// Solves and verifies the result against a run with twice the modes and
/// half the step.
pub fn kdv_reference_solve(params: &KdvParams) -> Result<KdvTable> {
    let base = solve(params)?;
    let fine = solve(&params.refined())?;
    let rms = base.rms_difference(&fine);
    if !(rms <= CONVERGENCE_TOL) {
        return Err(Error::Oracle(format!(
            "reference not converged: refinement changes the field by {rms:e} RMS"
        )));
    }
    Ok(base)
}

/// Reads the cache at `path` when its header matches, otherwise solves and
/// (re)writes it.
pub fn load_or_solve(path: Option<&Path>, params: &KdvParams) -> Result<KdvTable> {
    if let Some(p) = path {
        if p.exists() {
            if let Some(t) = KdvTable::read_csv(p, params)? {
                return Ok(t);
            }
            log::info!("reference cache {} is stale, recomputing", p.display());
        }
    }
    let table = kdv_reference_solve(params)?;
    if let Some(p) = path {
        table.write_csv(p)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_grids() {
        let p = KdvParams {
            modes: 500,
            ..Default::default()
        };
        assert!(matches!(solve(&p), Err(Error::Config(_))));
        let p = KdvParams {
            dt: 3e-4,
            ..Default::default()
        };
        assert!(matches!(solve(&p), Err(Error::Config(_))));
    }

    #[test]
    fn initial_frame_is_cosine() {
        let p = KdvParams {
            modes: 64,
            dt: 1e-3,
            nu: 0.05,
            t_end: 0.5,
            nx: 33,
            nt: 6,
        };
        let t = solve(&p).unwrap();
        for (ix, x) in t.x.iter().enumerate() {
            assert!((t.at(ix, 0) - (PI * x).cos()).abs() < 1e-14);
        }
    }
}
