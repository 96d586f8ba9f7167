//! Mixed time mesh: a geometrically graded start on `[0, m·h]` followed by a
//! uniform mesh with step `h = T/M` on `[m·h, T]`.
//!
//! Steps are numbered `0..num_steps()`: the first `v` are the graded steps
//! `i = 1..=v`, the rest are the uniform steps `j = m+1..=M`.

use crate::error::{Error, Result};

/// Which part of the mesh a step belongs to, with its 1-based index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    Graded(usize),
    Uniform(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub index: usize,
    pub kind: StepKind,
    pub t_start: f64,
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixedMesh {
    t_final: f64,
    big_m: usize,
    m: usize,
    v: usize,
    r: f64,
    h: f64,
    h1: f64,
    graded_steps: Vec<f64>,
    graded_nodes: Vec<f64>,
    uniform_nodes: Vec<f64>,
}

impl MixedMesh {
    /// `T > 0`, `1 ≤ m ≤ M`, `v ≥ 1`.
    pub fn build(t_final: f64, big_m: usize, m: usize, v: usize) -> Result<Self> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        if big_m == 0 || m == 0 || m > big_m || v == 0 {
            return Err(Error::InvalidParameter(format!(
                "mesh needs 1 <= m <= M and v >= 1 (got M={big_m}, m={m}, v={v})"
            )));
        }
        let h = t_final / big_m as f64;
        let r = if m == 1 {
            2.0
        } else {
            m as f64 / (m - 1) as f64
        };
        let span = m as f64 * h;
        let h1 = span * (r - 1.0) / (r.powi(v as i32) - 1.0);
        if !(h1 >= 1e-300) {
            return Err(Error::GradedUnderflow { h1 });
        }

        let graded_steps: Vec<f64> = (0..v).map(|i| h1 * r.powi(i as i32)).collect();
        let mut graded_nodes = Vec::with_capacity(v + 1);
        graded_nodes.push(0.0);
        // Neumaier summation
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for &hi in &graded_steps {
            let t = sum + hi;
            if sum.abs() >= hi.abs() {
                comp += (sum - t) + hi;
            } else {
                comp += (hi - t) + sum;
            }
            sum = t;
            graded_nodes.push(sum + comp);
        }

        let uniform_nodes: Vec<f64> = (m..=big_m)
            .map(|j| {
                if j == big_m {
                    t_final
                } else {
                    j as f64 * t_final / big_m as f64
                }
            })
            .collect();
        // the graded part ends exactly where the uniform part starts
        graded_nodes[v] = uniform_nodes[0];

        Ok(Self {
            t_final,
            big_m,
            m,
            v,
            r,
            h,
            h1,
            graded_steps,
            graded_nodes,
            uniform_nodes,
        })
    }

    /// Purely uniform mesh (`v = m = 1`).
    pub fn uniform(t_final: f64, big_m: usize) -> Result<Self> {
        Self::build(t_final, big_m, 1, 1)
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    /// `M`.
    pub fn big_m(&self) -> usize {
        self.big_m
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Uniform step `T/M`.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// First graded step.
    pub fn h1(&self) -> f64 {
        self.h1
    }

    /// `h_i = r^{i-1} h_1`, `i = 1..=v`.
    pub fn graded_steps(&self) -> &[f64] {
        &self.graded_steps
    }

    /// `t̂_0..t̂_v`.
    pub fn graded_nodes(&self) -> &[f64] {
        &self.graded_nodes
    }

    /// `t_m..t_M`.
    pub fn uniform_nodes(&self) -> &[f64] {
        &self.uniform_nodes
    }

    pub fn num_steps(&self) -> usize {
        self.v + self.big_m - self.m
    }

    pub fn step(&self, index: usize) -> Step {
        assert!(index < self.num_steps(), "step {index} out of range");
        if index < self.v {
            Step {
                index,
                kind: StepKind::Graded(index + 1),
                t_start: self.graded_nodes[index],
                h: self.graded_steps[index],
            }
        } else {
            let off = index - self.v;
            Step {
                index,
                kind: StepKind::Uniform(self.m + 1 + off),
                t_start: self.uniform_nodes[off],
                h: self.h,
            }
        }
    }

    pub fn steps(&self) -> impl Iterator<Item = Step> + '_ {
        (0..self.num_steps()).map(|n| self.step(n))
    }

    /// Time at the end of step `n - 1` (`node_time(0) = 0`).
    pub fn node_time(&self, n: usize) -> f64 {
        if n <= self.v {
            self.graded_nodes[n]
        } else {
            self.uniform_nodes[n - self.v]
        }
    }

    /// All `num_steps() + 1` node times, increasing.
    pub fn node_times(&self) -> Vec<f64> {
        (0..=self.num_steps()).map(|n| self.node_time(n)).collect()
    }

    /// Offset `x - 1` of the memory-kernel argument `x = (t - t_start(past)) / h(past)`
    /// for `t = t_start(current) + c·h(current)` and `past < current`.
    ///
    /// Assembled from the closed-form mesh expressions so that no cancellation
    /// occurs; the result is `>= 0` for every `c ∈ [0, 1]`.
    pub fn memory_offset(&self, past: usize, current: usize, c: f64) -> f64 {
        debug_assert!(past < current);
        let r = self.r;
        match (self.step(past).kind, self.step(current).kind) {
            (StepKind::Graded(iota), StepKind::Graded(i)) => {
                let lag = (i - iota) as i32;
                r * (r.powi(lag - 1) - 1.0) / (r - 1.0) + c * r.powi(lag)
            }
            (StepKind::Graded(iota), StepKind::Uniform(j)) => {
                let rv1 = r.powi(self.v as i32) - 1.0;
                let m = self.m as f64;
                let num = (j - 1 - self.m) as f64 * rv1
                    + m * (r.powi(self.v as i32) - r.powi(iota as i32))
                    + c * rv1;
                num / (m * r.powi(iota as i32 - 1) * (r - 1.0))
            }
            (StepKind::Uniform(jbar), StepKind::Uniform(j)) => (j - jbar - 1) as f64 + c,
            (StepKind::Uniform(_), StepKind::Graded(_)) => {
                unreachable!("uniform steps follow graded ones")
            }
        }
    }

    /// Step index and local coordinate `c ∈ (0, 1]` for `t ∈ (0, T]`; node times
    /// resolve to the step that ends there. `t = 0` maps to `(0, 0.0)`.
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        if !(t >= 0.0 && t <= self.t_final) {
            return Err(Error::OutOfRange {
                t,
                t_final: self.t_final,
            });
        }
        if t == 0.0 {
            return Ok((0, 0.0));
        }
        let nodes = self.node_times();
        // first node >= t, minus one
        let idx = nodes.partition_point(|&x| x < t);
        let n = idx.saturating_sub(1).min(self.num_steps() - 1);
        let step = self.step(n);
        let c = if idx < nodes.len() && nodes[idx] == t {
            1.0
        } else {
            ((t - step.t_start) / step.h).clamp(0.0, 1.0)
        };
        Ok((n, c))
    }
}
