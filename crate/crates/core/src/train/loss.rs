//! Physics-informed loss and its parameter gradient.

use crate::error::{config, usage, Result};
use crate::jets::{JetLayout, Tape, Var};
use crate::network::{Network, Outputs, ParameterSet};
use crate::pde::{BatchComposition, ConditionKind, FieldDerivs, Location, PdeProblem};

use super::sampling::{face_id, Batch};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// `λ⁻¹ L_PDE + λ_IC L_IC + λ_BC L_BC`
    Forward,
    /// `L_Data + λ⁻¹ L_PDE`
    Inverse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossSpec {
    /// The PDE term is divided by this.
    pub lambda: f64,
    pub lambda_ic: f64,
    pub lambda_bc: f64,
    pub data: bool,
    pub batch: BatchComposition,
}

impl LossSpec {
    pub fn for_problem(problem: &PdeProblem, lambda: f64) -> Self {
        LossSpec {
            lambda,
            lambda_ic: 1.0,
            lambda_bc: 1.0,
            data: problem.is_inverse(),
            batch: problem.batch(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda_ic > 0.0 && self.lambda_bc > 0.0) {
            return config("loss weights must be positive");
        }
        let b = &self.batch;
        if b.pde + b.ic + b.bc + if self.data { b.data } else { 0 } == 0 {
            return config("loss has no active term");
        }
        Ok(())
    }

    pub fn mode(&self) -> Mode {
        if self.data {
            Mode::Inverse
        } else {
            Mode::Forward
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub total: f64,
    pub pde: f64,
    pub ic: f64,
    pub bc: f64,
    pub data: f64,
    /// With respect to every entry of the parameter set, scalars included.
    pub gradient: Vec<f64>,
}

/// Pushes the problem's physics scalars into `params` (no-op for those
/// already present).
pub fn attach_scalars(params: &mut ParameterSet, problem: &PdeProblem) {
    for s in &problem.scalars {
        if params.scalar_index(&s.name).is_none() {
            params.push_scalar(&s.name, s.initial(), s.trainable);
        }
    }
}

struct TapeFields<'a, 't> {
    tape: &'t Tape,
    outputs: &'a Outputs<'t>,
    points: &'a [f64],
    dims: usize,
}

impl<'t> FieldDerivs<Var<'t>> for TapeFields<'_, 't> {
    fn d(&self, field: usize, dim: usize, order: usize) -> Result<Var<'t>> {
        self.outputs.deriv(field, dim, order)
    }

    fn coord(&self, dim: usize) -> Result<Var<'t>> {
        if dim >= self.dims {
            return usage(format!("coordinate {dim} missing"));
        }
        Ok(self
            .tape
            .constant(self.points.chunks(self.dims).map(|p| p[dim]).collect()))
    }
}

fn forward<'t>(
    network: &Network,
    tape: &'t Tape,
    points: &[f64],
    orders: &[(usize, usize)],
) -> Result<Outputs<'t>> {
    let layout = JetLayout::new(orders)?;
    let bound = network.bind(tape)?;
    let x = tape.seed_inputs(points, network.input_dim(), &layout)?;
    network.apply(tape, &bound, x, &layout)
}

fn mirror(points: &[f64], dims: usize, dim: usize, value: f64) -> Vec<f64> {
    let mut out = points.to_vec();
    for p in out.chunks_mut(dims) {
        p[dim] = value;
    }
    out
}

fn ensure(active: bool, points: &[f64], term: &str) -> Result<()> {
    if active && points.is_empty() {
        return config(format!("{term} term is active but its batch is empty"));
    }
    Ok(())
}

/// Evaluates the loss on `batch` and differentiates it.
pub fn compute_loss(
    network: &Network,
    params: &ParameterSet,
    problem: &PdeProblem,
    spec: &LossSpec,
    batch: &Batch,
    mode: Mode,
) -> Result<LossReport> {
    spec.validate()?;
    let d = problem.domain.dim();
    if network.input_dim() != d {
        return usage("network inputs do not match the problem domain");
    }
    if network.output_count() < problem.fields.len() {
        return usage("network has fewer outputs than the problem has fields");
    }
    if [&batch.pde, &batch.ic, &batch.bc].iter().any(|v| v.len() % d != 0)
        || batch.bc_faces.len() * d != batch.bc.len()
    {
        return usage("batch points do not match the domain dimension");
    }
    let tape = Tape::new(&params.values);
    let scalars: Vec<Var> = problem
        .scalars
        .iter()
        .map(|s| match params.scalar_index(&s.name) {
            Some(i) => tape.param(i, 1),
            None => Ok(tape.scalar(s.value)),
        })
        .collect::<Result<_>>()?;

    let zero = tape.scalar(0.0);
    let mut pde = zero;
    if spec.batch.pde > 0 {
        ensure(true, &batch.pde, "PDE")?;
        let out = forward(network, &tape, &batch.pde, &problem.equation.required_orders())?;
        let fields = TapeFields {
            tape: &tape,
            outputs: &out,
            points: &batch.pde,
            dims: d,
        };
        let residuals = problem.equation.residuals(&fields, &scalars)?;
        pde = tape.concat(&residuals).mean_square();
    }

    let (mut ic, mut bc, mut data) = (zero, zero, zero);
    match mode {
        Mode::Forward => {
            let ic_conds: Vec<_> = problem.active_conditions().filter(|c| c.is_initial()).collect();
            let bc_conds: Vec<_> = problem.active_conditions().filter(|c| !c.is_initial()).collect();
            let ic_on = spec.batch.ic > 0 && !ic_conds.is_empty();
            let bc_on = spec.batch.bc > 0 && !bc_conds.is_empty();
            ensure(ic_on, &batch.ic, "IC")?;
            ensure(bc_on, &batch.bc, "BC")?;

            if ic_on {
                let orders: Vec<_> = ic_conds
                    .iter()
                    .flat_map(|c| c.required_orders(&problem.domain))
                    .collect();
                let out = forward(network, &tape, &batch.ic, &orders)?;
                let mut parts = Vec::new();
                for c in &ic_conds {
                    let v = match c.kind {
                        ConditionKind::InitialTimeDerivative => {
                            let t = problem.domain.time.expect("initial condition without time");
                            out.deriv(c.field, t, 1)?
                        }
                        _ => out.value(c.field)?,
                    };
                    let target: Vec<f64> = batch.ic.chunks(d).map(|p| c.target.eval(p)).collect();
                    parts.push(v - tape.constant(target));
                }
                ic = tape.concat(&parts).mean_square();
            }

            if bc_on {
                // periodic conditions compare each lower-face point with its
                // image on the upper face, evaluated in the same pass
                let n = batch.bc_faces.len();
                let mut points = batch.bc.clone();
                let mut images = Vec::new();
                for c in &bc_conds {
                    if let (ConditionKind::PeriodicPair { .. }, Location::Face { dim, upper }) = (c.kind, c.location) {
                        let idx: Vec<usize> = (0..n).filter(|&i| batch.bc_faces[i] == face_id(dim, upper)).collect();
                        let sel: Vec<f64> = idx.iter().flat_map(|&i| batch.bc[i * d..(i + 1) * d].to_vec()).collect();
                        let other = if upper { problem.domain.lower[dim] } else { problem.domain.upper[dim] };
                        let start = points.len() / d;
                        points.extend(mirror(&sel, d, dim, other));
                        images.push((start..start + idx.len()).collect::<Vec<_>>());
                    } else {
                        images.push(Vec::new());
                    }
                }
                let orders: Vec<_> = bc_conds
                    .iter()
                    .flat_map(|c| c.required_orders(&problem.domain))
                    .collect();
                let out = forward(network, &tape, &points, &orders)?;
                let mut parts = Vec::new();
                for (c, image) in bc_conds.iter().zip(&images) {
                    let Location::Face { dim, upper } = c.location else { continue };
                    let idx: Vec<usize> = (0..n).filter(|&i| batch.bc_faces[i] == face_id(dim, upper)).collect();
                    if idx.is_empty() {
                        continue;
                    }
                    match c.kind {
                        ConditionKind::PeriodicPair { order } => {
                            for k in 0..=order {
                                let v = out.deriv(c.field, dim, k)?;
                                parts.push(tape.gather(v, &idx)? - tape.gather(v, image)?);
                            }
                        }
                        kind => {
                            let v = if kind == ConditionKind::Neumann {
                                out.deriv(c.field, dim, 1)?
                            } else {
                                out.value(c.field)?
                            };
                            let target: Vec<f64> =
                                idx.iter().map(|&i| c.target.eval(&batch.bc[i * d..(i + 1) * d])).collect();
                            parts.push(tape.gather(v, &idx)? - tape.constant(target));
                        }
                    }
                }
                if !parts.is_empty() {
                    bc = tape.concat(&parts).mean_square();
                }
            }
        }
        Mode::Inverse => {
            let obs = problem
                .observations
                .as_ref()
                .ok_or_else(|| crate::Error::Config("inverse mode needs observations".into()))?;
            let on = spec.data && spec.batch.data > 0;
            if on && batch.data.is_empty() {
                return config("data term is active but its batch is empty");
            }
            if on {
                let m = obs.fields.len();
                if let Some(&i) = batch.data.iter().find(|&&i| i >= obs.len()) {
                    return usage(format!("observation index {i} out of range"));
                }
                let points: Vec<f64> = batch
                    .data
                    .iter()
                    .flat_map(|&i| obs.points[i * d..(i + 1) * d].to_vec())
                    .collect();
                let out = forward(network, &tape, &points, &[])?;
                let mut parts = Vec::new();
                for (k, &f) in obs.fields.iter().enumerate() {
                    let target: Vec<f64> = batch.data.iter().map(|&i| obs.values[i * m + k]).collect();
                    parts.push(out.value(f)? - tape.constant(target));
                }
                data = tape.concat(&parts).mean_square();
            }
        }
    }

    let inv = 1.0 / spec.lambda;
    let total = match mode {
        Mode::Forward => pde * inv + ic * spec.lambda_ic + bc * spec.lambda_bc,
        Mode::Inverse => data + pde * inv,
    };
    tape.set_output(total)?;
    let gradient = tape.param_gradient()?;
    Ok(LossReport {
        total: total.item(),
        pde: pde.item(),
        ic: ic.item(),
        bc: bc.item(),
        data: data.item(),
        gradient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{NetworkConfig, Variant};
    use crate::pde;
    use crate::rng::stream;

    #[test]
    fn zero_network_on_convdiff() {
        let p = pde::convdiff();
        let cfg = NetworkConfig::for_variant("(x)-8-4-(u)", Variant::Standard, None).unwrap();
        let net = Network::new(cfg).unwrap();
        let mut params = net.init(&mut stream(0, 1)).unwrap();
        params.values.fill(0.0);
        attach_scalars(&mut params, &p);
        let batch = Batch {
            pde: vec![0.1, 0.5, 0.9],
            bc: vec![0.0, 1.0],
            bc_faces: vec![0, 1],
            ..Default::default()
        };
        let spec = LossSpec::for_problem(&p, 500.0);
        let r = compute_loss(&net, &params, &p, &spec, &batch, Mode::Forward).unwrap();
        assert_eq!(r.pde, 0.0);
        assert_eq!(r.bc, 0.5);
        assert_eq!(r.total, 0.5);
        assert_eq!(r.gradient.len(), params.len());
    }

    #[test]
    fn empty_active_term_is_config_error() {
        let p = pde::convdiff();
        let net = Network::new(NetworkConfig::for_variant("(x)-4-(u)", Variant::Sf, Some(1.0)).unwrap()).unwrap();
        let params = net.init(&mut stream(0, 1)).unwrap();
        let batch = Batch {
            pde: vec![0.5],
            ..Default::default()
        };
        let spec = LossSpec::for_problem(&p, 1.0);
        assert!(matches!(
            compute_loss(&net, &params, &p, &spec, &batch, Mode::Forward),
            Err(crate::Error::Config(_))
        ));
    }
}
