//! Adjoint record over vector-valued nodes.
//!
//! Nodes hold flat `f64` buffers. Network layers store *jet batches*: a
//! row-major `[rows][points][slots]` buffer where each `(row, point)` cell
//! carries the value in slot 0 followed, for every seeded direction, by that
//! direction's Taylor coefficients of orders `1..=k`. All directions share
//! the order-0 value, and no cross terms are carried.
//!
//! The reverse sweep propagates adjoints of every Taylor coefficient back to
//! the parameter leaves, so a loss built from input derivatives of the
//! network gets its exact parameter gradient.

use std::cell::{Ref, RefCell};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use super::{compose_adjoint, compose_forward, Activation, Real, FACTORIAL, MAX_ORDER};
use crate::error::{usage, Error, Result};

pub type NodeId = usize;

/// Which input dimensions are seeded, and to what order, in a jet batch.
///
/// Slot 0 holds the value; group `g` occupies slots
/// `offset(g)..offset(g) + order(g)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct JetLayout {
    groups: Vec<(usize, usize)>,
}

impl JetLayout {
    /// Plain values only.
    pub fn values() -> Self {
        JetLayout { groups: Vec::new() }
    }

    /// One group per `(input_dim, order)`; orders of zero are dropped and
    /// repeated dimensions keep their highest order.
    pub fn new(groups: &[(usize, usize)]) -> Result<Self> {
        let mut merged: Vec<(usize, usize)> = Vec::new();
        for &(dim, order) in groups {
            if order > MAX_ORDER {
                return Err(Error::Config(format!(
                    "jet order {order} exceeds maximum {MAX_ORDER}"
                )));
            }
            if order == 0 {
                continue;
            }
            match merged.iter_mut().find(|(d, _)| *d == dim) {
                Some(entry) => entry.1 = entry.1.max(order),
                None => merged.push((dim, order)),
            }
        }
        merged.sort_unstable();
        Ok(JetLayout { groups: merged })
    }

    pub fn single(dim: usize, order: usize) -> Result<Self> {
        Self::new(&[(dim, order)])
    }

    pub fn slots(&self) -> usize {
        1 + self.groups.iter().map(|g| g.1).sum::<usize>()
    }

    pub fn groups(&self) -> &[(usize, usize)] {
        &self.groups
    }

    pub fn order_of(&self, dim: usize) -> usize {
        self.groups
            .iter()
            .find(|g| g.0 == dim)
            .map(|g| g.1)
            .unwrap_or(0)
    }

    /// Slot index holding the order-`order` coefficient along `dim`.
    pub fn slot(&self, dim: usize, order: usize) -> Option<usize> {
        if order == 0 {
            return Some(0);
        }
        let mut offset = 1;
        for &(d, k) in &self.groups {
            if d == dim {
                return (order <= k).then_some(offset + order - 1);
            }
            offset += k;
        }
        None
    }

    fn group_orders(&self) -> Arc<[usize]> {
        self.groups.iter().map(|g| g.1).collect()
    }

    /// Union of two layouts, keeping the higher order per dimension.
    pub fn union(&self, other: &JetLayout) -> JetLayout {
        let mut all = self.groups.clone();
        all.extend_from_slice(&other.groups);
        JetLayout::new(&all).expect("orders already validated")
    }
}

#[derive(Debug, Clone)]
enum Op {
    Const,
    Param {
        offset: usize,
    },
    Affine {
        w: NodeId,
        b: Option<NodeId>,
        x: NodeId,
        rows_out: usize,
        rows_in: usize,
        cols: usize,
        slots: usize,
    },
    Activate {
        x: NodeId,
        f: Activation,
        slots: usize,
        orders: Arc<[usize]>,
    },
    ConcatRows {
        a: NodeId,
        b: NodeId,
    },
    Extract {
        x: NodeId,
        row: usize,
        slot: usize,
        points: usize,
        slots: usize,
        factor: f64,
    },
    Scale {
        x: NodeId,
        c: f64,
    },
    Offset {
        x: NodeId,
        c: f64,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Sub {
        a: NodeId,
        b: NodeId,
    },
    Mul {
        a: NodeId,
        b: NodeId,
    },
    Neg {
        x: NodeId,
    },
    MeanSquare {
        x: NodeId,
    },
    Sum {
        x: NodeId,
    },
    Concat {
        parts: Vec<NodeId>,
    },
    Gather {
        x: NodeId,
        indices: Arc<[usize]>,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    op: Op,
    needs_grad: bool,
}

/// Adjoint record: an append-only, topologically ordered list of operations.
///
/// Variables ([`Var`]) borrow the tape, so a record is confined to the
/// thread that builds it.
#[derive(Debug)]
pub struct Tape {
    params: Vec<f64>,
    nodes: RefCell<Vec<Node>>,
    output: RefCell<Option<NodeId>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: NodeId,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var").field("id", &self.id).finish()
    }
}

impl Tape {
    /// A record whose parameter leaves are slices of `params`.
    pub fn new(params: &[f64]) -> Self {
        Tape {
            params: params.to_vec(),
            nodes: RefCell::new(Vec::new()),
            output: RefCell::new(None),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Vec<f64>, op: Op) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let needs_grad = match &op {
            Op::Const => false,
            Op::Param { .. } => true,
            other => inputs(other).iter().any(|&i| nodes[i].needs_grad),
        };
        nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn record(&self, op: Op) -> Var<'_> {
        let value = {
            let nodes = self.nodes.borrow();
            evaluate(&op, &nodes)
        };
        self.push(value, op)
    }

    pub fn constant(&self, value: Vec<f64>) -> Var<'_> {
        self.push(value, Op::Const)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(vec![value])
    }

    /// Trainable leaf covering `params[offset..offset + len]`.
    pub fn param(&self, offset: usize, len: usize) -> Result<Var<'_>> {
        if offset + len > self.params.len() {
            return usage(format!(
                "parameter slice {offset}..{} outside {} parameters",
                offset + len,
                self.params.len()
            ));
        }
        Ok(self.push(self.params[offset..offset + len].to_vec(), Op::Param { offset }))
    }

    /// Constant jet batch for the given input points (row-major `[point][dim]`).
    pub fn seed_inputs(&self, points: &[f64], dims: usize, layout: &JetLayout) -> Result<Var<'_>> {
        if dims == 0 || points.len() % dims != 0 {
            return usage("point buffer is not a multiple of the input dimension");
        }
        if let Some(&(d, _)) = layout.groups().iter().find(|g| g.0 >= dims) {
            return usage(format!("seeded dimension {d} out of range for {dims} inputs"));
        }
        let n = points.len() / dims;
        let slots = layout.slots();
        let mut buf = vec![0.0; dims * n * slots];
        for i in 0..dims {
            let first = layout.slot(i, 1);
            for p in 0..n {
                let base = (i * n + p) * slots;
                buf[base] = points[p * dims + i];
                if let Some(s) = first {
                    buf[base + s] = 1.0;
                }
            }
        }
        Ok(self.constant(buf))
    }

    /// `W · X + b` applied to every coefficient column of a jet batch; the
    /// bias only enters the value slot.
    pub fn affine<'t>(
        &'t self,
        w: Var<'t>,
        b: Option<Var<'t>>,
        x: Var<'t>,
        rows_out: usize,
        rows_in: usize,
        slots: usize,
    ) -> Result<Var<'t>> {
        let (wl, xl) = (w.len(), x.len());
        if wl != rows_out * rows_in {
            return usage(format!("weight has {wl} entries, expected {rows_out}x{rows_in}"));
        }
        if rows_in == 0 || xl % rows_in != 0 || (xl / rows_in) % slots != 0 {
            return usage(format!("input of {xl} entries does not match {rows_in} rows"));
        }
        if let Some(b) = b {
            if b.len() != rows_out {
                return usage("bias length does not match output rows");
            }
        }
        Ok(self.record(Op::Affine {
            w: w.id,
            b: b.map(|b| b.id),
            x: x.id,
            rows_out,
            rows_in,
            cols: xl / rows_in,
            slots,
        }))
    }

    /// Elementwise `f` composed with every jet in a batch laid out by `layout`.
    pub fn activate<'t>(&'t self, x: Var<'t>, f: Activation, layout: &JetLayout) -> Result<Var<'t>> {
        if x.len() % layout.slots() != 0 {
            return usage("buffer length is not a multiple of the jet slot count");
        }
        Ok(self.record(Op::Activate {
            x: x.id,
            f,
            slots: layout.slots(),
            orders: layout.group_orders(),
        }))
    }

    pub fn concat_rows<'t>(&'t self, a: Var<'t>, b: Var<'t>) -> Var<'t> {
        self.record(Op::ConcatRows { a: a.id, b: b.id })
    }

    /// Concatenation of plain vectors.
    pub fn concat<'t>(&'t self, parts: &[Var<'t>]) -> Var<'t> {
        self.record(Op::Concat {
            parts: parts.iter().map(|v| v.id).collect(),
        })
    }

    /// Vector over points of the raw derivative `d^order / d(dim)^order` of
    /// row `row` of a jet batch holding `points` points per row.
    pub fn derivative<'t>(
        &'t self,
        x: Var<'t>,
        layout: &JetLayout,
        points: usize,
        row: usize,
        dim: usize,
        order: usize,
    ) -> Result<Var<'t>> {
        let slot = layout.slot(dim, order).ok_or_else(|| {
            Error::Usage(format!(
                "derivative of order {order} along input {dim} not carried by this jet batch"
            ))
        })?;
        let slots = layout.slots();
        if (row + 1) * points * slots > x.len() {
            return usage(format!("row {row} outside jet batch"));
        }
        Ok(self.record(Op::Extract {
            x: x.id,
            row,
            slot,
            points,
            slots,
            factor: FACTORIAL[order],
        }))
    }

    /// Entries of a plain vector at `indices`.
    pub fn gather<'t>(&'t self, x: Var<'t>, indices: &[usize]) -> Result<Var<'t>> {
        let n = x.len();
        if let Some(&i) = indices.iter().find(|&&i| i >= n) {
            return usage(format!("gather index {i} outside vector of {n}"));
        }
        Ok(self.record(Op::Gather {
            x: x.id,
            indices: indices.into(),
        }))
    }

    pub fn mean_square<'t>(&'t self, x: Var<'t>) -> Var<'t> {
        self.record(Op::MeanSquare { x: x.id })
    }

    pub fn sum<'t>(&'t self, x: Var<'t>) -> Var<'t> {
        self.record(Op::Sum { x: x.id })
    }

    /// Designates the scalar whose parameter gradient is requested.
    pub fn set_output(&self, v: Var<'_>) -> Result<()> {
        if v.len() != 1 {
            return usage(format!("output must be scalar, node has {} entries", v.len()));
        }
        *self.output.borrow_mut() = Some(v.id);
        Ok(())
    }

    pub fn output(&self) -> Option<NodeId> {
        *self.output.borrow()
    }

    pub fn value(&self, id: NodeId) -> Ref<'_, [f64]> {
        Ref::map(self.nodes.borrow(), |n| n[id].value.as_slice())
    }

    /// Re-evaluates every node from the leaves and returns the output value.
    pub fn replay(&self) -> Result<f64> {
        let out = self
            .output()
            .ok_or_else(|| Error::Usage("no output designated".into()))?;
        let nodes = self.nodes.borrow();
        let mut fresh: Vec<Node> = Vec::with_capacity(nodes.len());
        for node in nodes.iter() {
            let value = match node.op {
                Op::Const | Op::Param { .. } => node.value.clone(),
                ref op => evaluate(op, &fresh),
            };
            fresh.push(Node {
                value,
                op: node.op.clone(),
                needs_grad: node.needs_grad,
            });
        }
        Ok(fresh[out].value[0])
    }

    /// Gradient of the designated output with respect to every parameter.
    pub fn param_gradient(&self) -> Result<Vec<f64>> {
        let out = self
            .output()
            .ok_or_else(|| Error::Usage("no output designated".into()))?;
        let nodes = self.nodes.borrow();
        let mut grad = vec![0.0; self.params.len()];
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; out + 1];
        adj[out] = Some(vec![1.0]);
        for id in (0..=out).rev() {
            let Some(g) = adj[id].take() else { continue };
            let node = &nodes[id];
            if !node.needs_grad {
                continue;
            }
            backward(&node.op, &g, node, &nodes, &mut adj, &mut grad);
        }
        Ok(grad)
    }
}

fn inputs(op: &Op) -> Vec<NodeId> {
    match op {
        Op::Const | Op::Param { .. } => vec![],
        Op::Affine { w, b, x, .. } => {
            let mut v = vec![*w, *x];
            if let Some(b) = b {
                v.push(*b);
            }
            v
        }
        Op::Activate { x, .. }
        | Op::Extract { x, .. }
        | Op::Scale { x, .. }
        | Op::Offset { x, .. }
        | Op::Neg { x }
        | Op::MeanSquare { x }
        | Op::Sum { x }
        | Op::Gather { x, .. } => vec![*x],
        Op::ConcatRows { a, b } | Op::Add { a, b } | Op::Sub { a, b } | Op::Mul { a, b } => {
            vec![*a, *b]
        }
        Op::Concat { parts } => parts.clone(),
    }
}

fn broadcast(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    match (a.len(), b.len()) {
        (n, m) if n == m => a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect(),
        (1, _) => b.iter().map(|&y| f(a[0], y)).collect(),
        (_, 1) => a.iter().map(|&x| f(x, b[0])).collect(),
        (n, m) => panic!("cannot broadcast lengths {n} and {m}"),
    }
}

/// `c (m×n) = a (m×k) · b (k×n) (+ c when `accumulate`)`, row-major with
/// explicit strides for `a` and `b`.
///
/// # Safety
/// `a`, `b` must cover the strided m×k and k×n regions and `c` must be valid
/// for m×n writes (and initialized when `accumulate`).
#[allow(clippy::too_many_arguments)]
unsafe fn gemm_raw(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    accumulate: bool,
    c: *mut f64,
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            std::ptr::write_bytes(c, 0, m * n);
        }
        return;
    }
    matrixmultiply::dgemm(
        m,
        k,
        n,
        1.0,
        a.as_ptr(),
        rsa,
        csa,
        b.as_ptr(),
        rsb,
        csb,
        if accumulate { 1.0 } else { 0.0 },
        c,
        n as isize,
        1,
    );
}

/// Product into a fresh buffer.
#[allow(clippy::too_many_arguments)]
fn gemm_new(m: usize, k: usize, n: usize, a: &[f64], rsa: isize, csa: isize, b: &[f64], rsb: isize, csb: isize) -> Vec<f64> {
    debug_assert!(a.len() >= m * k && b.len() >= k * n);
    let mut c = Vec::with_capacity(m * n);
    // SAFETY: callers pass operands sized m×k and k×n; every one of the m×n
    // entries is written before the length is set.
    unsafe {
        gemm_raw(m, k, n, a, rsa, csa, b, rsb, csb, false, c.as_mut_ptr());
        c.set_len(m * n);
    }
    c
}

/// Adds the product into `c`, or stores it there if `c` is still empty.
#[allow(clippy::too_many_arguments)]
fn gemm_add(
    c: &mut Option<Vec<f64>>,
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
) {
    match c {
        Some(c) => {
            assert_eq!(c.len(), m * n);
            // SAFETY: `c` holds m×n initialized entries; operands as above.
            unsafe { gemm_raw(m, k, n, a, rsa, csa, b, rsb, csb, true, c.as_mut_ptr()) }
        }
        None => *c = Some(gemm_new(m, k, n, a, rsa, csa, b, rsb, csb)),
    }
}

fn evaluate(op: &Op, nodes: &[Node]) -> Vec<f64> {
    match *op {
        Op::Const | Op::Param { .. } => unreachable!("leaves carry their own value"),
        Op::Affine {
            w,
            b,
            x,
            rows_out,
            rows_in,
            cols,
            slots,
        } => {
            let mut out = gemm_new(
                rows_out,
                rows_in,
                cols,
                &nodes[w].value,
                rows_in as isize,
                1,
                &nodes[x].value,
                cols as isize,
                1,
            );
            if let Some(b) = b {
                let bias = &nodes[b].value;
                for (j, row) in out.chunks_exact_mut(cols).enumerate() {
                    for v in row.iter_mut().step_by(slots) {
                        *v += bias[j];
                    }
                }
            }
            out
        }
        Op::Activate {
            x,
            f,
            slots,
            ref orders,
        } => {
            let input = &nodes[x].value;
            let mut out = vec![0.0; input.len()];
            for (a, c) in input.chunks_exact(slots).zip(out.chunks_exact_mut(slots)) {
                if slots == 1 {
                    c[0] = f.apply(a[0]);
                    continue;
                }
                let y = f.apply(a[0]);
                let d = f.derivatives_with_value(a[0], y);
                c[0] = y;
                let mut off = 1;
                for &k in orders.iter() {
                    compose_forward(&d, &a[off..off + k], &mut c[off..off + k]);
                    off += k;
                }
            }
            out
        }
        Op::ConcatRows { a, b } => {
            let mut out = nodes[a].value.clone();
            out.extend_from_slice(&nodes[b].value);
            out
        }
        Op::Concat { ref parts } => parts
            .iter()
            .flat_map(|&p| nodes[p].value.iter().copied())
            .collect(),
        Op::Extract {
            x,
            row,
            slot,
            points,
            slots,
            factor,
        } => {
            let v = &nodes[x].value;
            let base = row * points * slots;
            (0..points)
                .map(|p| v[base + p * slots + slot] * factor)
                .collect()
        }
        Op::Scale { x, c } => nodes[x].value.iter().map(|v| v * c).collect(),
        Op::Offset { x, c } => nodes[x].value.iter().map(|v| v + c).collect(),
        Op::Neg { x } => nodes[x].value.iter().map(|v| -v).collect(),
        Op::Add { a, b } => broadcast(&nodes[a].value, &nodes[b].value, |x, y| x + y),
        Op::Sub { a, b } => broadcast(&nodes[a].value, &nodes[b].value, |x, y| x - y),
        Op::Mul { a, b } => broadcast(&nodes[a].value, &nodes[b].value, |x, y| x * y),
        Op::MeanSquare { x } => {
            let v = &nodes[x].value;
            if v.is_empty() {
                vec![0.0]
            } else {
                vec![v.iter().map(|e| e * e).sum::<f64>() / v.len() as f64]
            }
        }
        Op::Sum { x } => vec![nodes[x].value.iter().sum()],
        Op::Gather { x, ref indices } => indices.iter().map(|&i| nodes[x].value[i]).collect(),
    }
}

fn accumulate(adj: &mut [Option<Vec<f64>>], nodes: &[Node], id: NodeId, g: &[f64]) {
    if !nodes[id].needs_grad {
        return;
    }
    let len = nodes[id].value.len();
    let slot = adj[id].get_or_insert_with(|| vec![0.0; len]);
    if g.len() == len {
        slot.iter_mut().zip(g).for_each(|(s, v)| *s += v);
    } else {
        // broadcast operand of length one
        debug_assert_eq!(len, 1);
        slot[0] += g.iter().sum::<f64>();
    }
}

/// Owned variant of [`accumulate`]; the first contribution is moved in.
fn accumulate_vec(adj: &mut [Option<Vec<f64>>], nodes: &[Node], id: NodeId, g: Vec<f64>) {
    if adj[id].is_none() && nodes[id].needs_grad && g.len() == nodes[id].value.len() {
        adj[id] = Some(g);
    } else {
        accumulate(adj, nodes, id, &g);
    }
}

fn backward(
    op: &Op,
    g: &[f64],
    node: &Node,
    nodes: &[Node],
    adj: &mut [Option<Vec<f64>>],
    grad: &mut [f64],
) {
    match *op {
        Op::Const => {}
        Op::Param { offset } => {
            for (dst, v) in grad[offset..offset + g.len()].iter_mut().zip(g) {
                *dst += v;
            }
        }
        Op::Affine {
            w,
            b,
            x,
            rows_out,
            rows_in,
            cols,
            slots,
        } => {
            if nodes[w].needs_grad {
                gemm_add(
                    &mut adj[w],
                    rows_out,
                    cols,
                    rows_in,
                    g,
                    cols as isize,
                    1,
                    &nodes[x].value,
                    1,
                    cols as isize,
                );
            }
            if let Some(b) = b {
                if nodes[b].needs_grad {
                    let gb: Vec<f64> = g
                        .chunks_exact(cols)
                        .map(|row| row.iter().step_by(slots).sum())
                        .collect();
                    accumulate_vec(adj, nodes, b, gb);
                }
            }
            if nodes[x].needs_grad {
                gemm_add(
                    &mut adj[x],
                    rows_in,
                    rows_out,
                    cols,
                    &nodes[w].value,
                    1,
                    rows_in as isize,
                    g,
                    cols as isize,
                    1,
                );
            }
        }
        Op::Activate {
            x,
            f,
            slots,
            ref orders,
        } => {
            if !nodes[x].needs_grad {
                return;
            }
            let input = &nodes[x].value;
            let out = &node.value;
            let mut gx = vec![0.0; input.len()];
            for ((a, y), (gc, ga)) in input
                .chunks_exact(slots)
                .zip(out.chunks_exact(slots))
                .zip(g.chunks_exact(slots).zip(gx.chunks_exact_mut(slots)))
            {
                let d = f.derivatives_with_value(a[0], y[0]);
                let mut g0 = gc[0] * d[1];
                let mut off = 1;
                for &k in orders.iter() {
                    g0 += compose_adjoint(&d, &a[off..off + k], &gc[off..off + k], &mut ga[off..off + k]);
                    off += k;
                }
                ga[0] += g0;
            }
            accumulate_vec(adj, nodes, x, gx);
        }
        Op::ConcatRows { a, b } => {
            let na = nodes[a].value.len();
            accumulate(adj, nodes, a, &g[..na]);
            accumulate(adj, nodes, b, &g[na..]);
        }
        Op::Concat { ref parts } => {
            let mut off = 0;
            for &p in parts {
                let n = nodes[p].value.len();
                accumulate(adj, nodes, p, &g[off..off + n]);
                off += n;
            }
        }
        Op::Extract {
            x,
            row,
            slot,
            points,
            slots,
            factor,
        } => {
            if !nodes[x].needs_grad {
                return;
            }
            let mut gx = vec![0.0; nodes[x].value.len()];
            let base = row * points * slots;
            for (p, gv) in g.iter().enumerate() {
                gx[base + p * slots + slot] = gv * factor;
            }
            accumulate_vec(adj, nodes, x, gx);
        }
        Op::Scale { x, c } => {
            let gx: Vec<f64> = g.iter().map(|v| v * c).collect();
            accumulate_vec(adj, nodes, x, gx);
        }
        Op::Offset { x, .. } => accumulate(adj, nodes, x, g),
        Op::Neg { x } => {
            let gx: Vec<f64> = g.iter().map(|v| -v).collect();
            accumulate_vec(adj, nodes, x, gx);
        }
        Op::Add { a, b } => {
            accumulate(adj, nodes, a, g);
            accumulate(adj, nodes, b, g);
        }
        Op::Sub { a, b } => {
            accumulate(adj, nodes, a, g);
            let gb: Vec<f64> = g.iter().map(|v| -v).collect();
            accumulate_vec(adj, nodes, b, gb);
        }
        Op::Mul { a, b } => {
            let (va, vb) = (&nodes[a].value, &nodes[b].value);
            if nodes[a].needs_grad {
                let ga = broadcast(g, vb, |x, y| x * y);
                accumulate_vec(adj, nodes, a, ga);
            }
            if nodes[b].needs_grad {
                let gb = broadcast(g, va, |x, y| x * y);
                accumulate_vec(adj, nodes, b, gb);
            }
        }
        Op::MeanSquare { x } => {
            let v = &nodes[x].value;
            if v.is_empty() {
                return;
            }
            let s = 2.0 * g[0] / v.len() as f64;
            let gx: Vec<f64> = v.iter().map(|e| s * e).collect();
            accumulate_vec(adj, nodes, x, gx);
        }
        Op::Sum { x } => {
            let gx = vec![g[0]; nodes[x].value.len()];
            accumulate_vec(adj, nodes, x, gx);
        }
        Op::Gather { x, ref indices } => {
            let mut gx = vec![0.0; nodes[x].value.len()];
            for (&i, gv) in indices.iter().zip(g) {
                gx[i] += gv;
            }
            accumulate_vec(adj, nodes, x, gx);
        }
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn len(&self) -> usize {
        self.tape.nodes.borrow()[self.id].value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self) -> Vec<f64> {
        self.tape.nodes.borrow()[self.id].value.clone()
    }

    /// First entry; the value of scalar nodes.
    pub fn item(&self) -> f64 {
        self.tape.nodes.borrow()[self.id].value[0]
    }

    pub fn mean_square(self) -> Var<'t> {
        self.tape.mean_square(self)
    }

    pub fn sum(self) -> Var<'t> {
        self.tape.sum(self)
    }

    fn unary(self, f: Activation) -> Var<'t> {
        self.tape
            .activate(self, f, &JetLayout::values())
            .expect("plain vectors have one slot")
    }

    fn binary(self, rhs: Var<'t>, make: fn(NodeId, NodeId) -> Op) -> Var<'t> {
        assert!(std::ptr::eq(self.tape, rhs.tape), "variables from different tapes");
        let (n, m) = (self.len(), rhs.len());
        assert!(
            n == m || n == 1 || m == 1,
            "cannot broadcast lengths {n} and {m}"
        );
        self.tape.record(make(self.id, rhs.id))
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, |a, b| Op::Add { a, b })
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, |a, b| Op::Sub { a, b })
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, |a, b| Op::Mul { a, b })
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.tape.record(Op::Neg { x: self.id })
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, c: f64) -> Var<'t> {
        self.tape.record(Op::Offset { x: self.id, c })
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, c: f64) -> Var<'t> {
        self.tape.record(Op::Offset { x: self.id, c: -c })
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, c: f64) -> Var<'t> {
        self.tape.record(Op::Scale { x: self.id, c })
    }
}

impl Real for Var<'_> {
    fn sin(self) -> Self {
        self.unary(Activation::Sin)
    }
    fn cos(self) -> Self {
        self.unary(Activation::Cos)
    }
    fn exp(self) -> Self {
        self.unary(Activation::Exp)
    }
}
