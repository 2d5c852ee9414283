use super::{SeparableProx, StackedLayout, Steps};
use crate::block::BlockPartition;
use crate::error::{check_len, Result};
use crate::operator::{CoordinateSession, ResidualOperator};
use crate::sparse::SparseMatrix;
use crate::Scalar;

/// When the cached products are recomputed from scratch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheRefresh {
    /// Refresh after this many coordinate steps.
    pub every_steps: Option<usize>,
    pub at_epoch_end: bool,
}

impl CacheRefresh {
    pub const NEVER: Self = Self { every_steps: None, at_epoch_end: false };
}

impl Default for CacheRefresh {
    fn default() -> Self {
        Self { every_steps: Some(1000), at_epoch_end: true }
    }
}

/// `A x` and `A^T s` for the current iterate, plus the number of
/// coordinate steps since they were last recomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct PdCache<T> {
    pub ax: Vec<T>,
    pub ats: Vec<T>,
    pub staleness: usize,
}

/// Stored iterate with its caches.
#[derive(Debug, Clone, PartialEq)]
pub struct PdState<T> {
    /// Iterate in storage order (see [`StackedLayout`]).
    pub z: Vec<T>,
    pub cache: PdCache<T>,
}

/// The `g = h = 0` iteration
///
/// ```text
/// x+ = x - eta A^T s
/// s+ = prox(s + gamma A x - 2 gamma A eta A^T s)
/// ```
///
/// with diagonal steps, as the residual `S z = z - z+`.
pub struct SimplifiedPd<T> {
    a: SparseMatrix<T>,
    eta: Steps<T>,
    gamma: Steps<T>,
    prox: Box<dyn SeparableProx<T>>,
    layout: StackedLayout,
    refresh: CacheRefresh,
}

/// Builds the simplified operator; `prox` is the (already step-scaled) prox
/// of `gamma f*`, applied entrywise to the dual variable.
pub fn build_simplified<T: Scalar>(
    a: SparseMatrix<T>,
    prox: Box<dyn SeparableProx<T>>,
    eta: Steps<T>,
    gamma: Steps<T>,
    layout: StackedLayout,
) -> Result<SimplifiedPd<T>> {
    check_len(a.ncols(), layout.primal())?;
    check_len(a.nrows(), layout.dual())?;
    eta.validate(a.ncols())?;
    gamma.validate(a.nrows())?;
    Ok(SimplifiedPd { a, eta, gamma, prox, layout, refresh: CacheRefresh::default() })
}

impl<T: Scalar> SimplifiedPd<T> {
    pub fn with_refresh(mut self, refresh: CacheRefresh) -> Self {
        self.refresh = refresh;
        self
    }

    pub fn refresh_policy(&self) -> CacheRefresh {
        self.refresh
    }

    pub fn matrix(&self) -> &SparseMatrix<T> {
        &self.a
    }

    pub fn layout(&self) -> &StackedLayout {
        &self.layout
    }

    pub fn eta(&self) -> &Steps<T> {
        &self.eta
    }

    pub fn gamma(&self) -> &Steps<T> {
        &self.gamma
    }

    pub fn prox(&self) -> &dyn SeparableProx<T> {
        self.prox.as_ref()
    }

    /// The full update `z+` in canonical `(x, s)` form.
    pub fn full_update(&self, x: &[T], s: &[T]) -> (Vec<T>, Vec<T>) {
        let mut ats = vec![T::zero(); self.a.ncols()];
        self.a.matvec_t_into(s, &mut ats);
        let w: Vec<T> = ats.iter().enumerate().map(|(k, &v)| self.eta.get(k) * v).collect();
        let mut ax = vec![T::zero(); self.a.nrows()];
        self.a.matvec_into(x, &mut ax);
        let mut aw = vec![T::zero(); self.a.nrows()];
        self.a.matvec_into(&w, &mut aw);
        let x_next = x.iter().zip(&w).map(|(&xi, &wi)| xi - wi).collect();
        let two = T::lit(2.0);
        let s_next = (0..s.len())
            .map(|j| self.prox.prox_entry(j, s[j] + self.gamma.get(j) * (ax[j] - two * aw[j])))
            .collect();
        (x_next, s_next)
    }

    /// Cached products for the stored iterate `z`.
    pub fn fresh_cache(&self, z: &[T]) -> PdCache<T> {
        let (x, s) = self.layout.split(z);
        let mut ax = vec![T::zero(); self.a.nrows()];
        let mut ats = vec![T::zero(); self.a.ncols()];
        self.a.matvec_into(&x, &mut ax);
        self.a.matvec_t_into(&s, &mut ats);
        PdCache { ax, ats, staleness: 0 }
    }

    pub fn init_state(&self, z: Vec<T>) -> Result<PdState<T>> {
        check_len(self.layout.dim(), z.len())?;
        let cache = self.fresh_cache(&z);
        Ok(PdState { z, cache })
    }

    /// Recomputes both caches exactly; the iterate is untouched.
    pub fn refresh_cache(&self, state: &mut PdState<T>) {
        state.cache = self.fresh_cache(&state.z);
    }

    /// Replaces block `block` of the iterate by `z_b - alpha (S z)_b` using
    /// the caches, then updates the caches by rank-one corrections.
    pub fn coord_step_cached(&self, state: &mut PdState<T>, block: usize, alpha: T) -> Result<()> {
        self.partition().check_block(block)?;
        let mut delta = vec![T::zero(); self.partition().block_len(block)];
        self.cached_step(&mut state.z, &mut state.cache, &mut delta, block, alpha);
        Ok(())
    }

    fn cached_step(&self, z: &mut [T], cache: &mut PdCache<T>, delta: &mut [T], block: usize, alpha: T) {
        let range = self.partition().range(block);
        let np = self.layout.primal();
        let two = T::lit(2.0);
        for (d, p) in delta.iter_mut().zip(range.clone()) {
            let c = self.layout.canonical(p);
            let res = if c < np {
                self.eta.get(c) * cache.ats[c]
            } else {
                let j = c - np;
                let (idx, val) = self.a.row(j);
                let a_eta_ats = idx
                    .iter()
                    .zip(val)
                    .fold(T::zero(), |acc, (&k, &v)| acc + v * self.eta.get(k) * cache.ats[k]);
                let sj = z[p];
                sj - self.prox.prox_entry(j, sj + self.gamma.get(j) * (cache.ax[j] - two * a_eta_ats))
            };
            *d = -alpha * res;
        }
        for (&d, p) in delta.iter().zip(range) {
            if d == T::zero() {
                continue;
            }
            z[p] += d;
            let c = self.layout.canonical(p);
            if c < np {
                let (idx, val) = self.a.col(c);
                for (&i, &v) in idx.iter().zip(val) {
                    cache.ax[i] += v * d;
                }
            } else {
                let (idx, val) = self.a.row(c - np);
                for (&k, &v) in idx.iter().zip(val) {
                    cache.ats[k] += v * d;
                }
            }
        }
        cache.staleness += 1;
        if self.refresh.every_steps.is_some_and(|n| cache.staleness >= n) {
            *cache = self.fresh_cache(z);
        }
    }

    /// `(A^T s)_k` straight from the stored iterate.
    fn ats_entry(&self, z: &[T], k: usize) -> T {
        let np = self.layout.primal();
        let (idx, val) = self.a.col(k);
        idx.iter()
            .zip(val)
            .fold(T::zero(), |acc, (&j, &v)| acc + v * z[self.layout.position(np + j)])
    }
}

impl<T: Scalar> ResidualOperator<T> for SimplifiedPd<T> {
    fn partition(&self) -> &BlockPartition {
        self.layout.partition()
    }

    fn eval_full(&self, z: &[T], out: &mut [T]) {
        let (x, s) = self.layout.split(z);
        let (xn, sn) = self.full_update(&x, &s);
        let np = self.layout.primal();
        for (c, (xi, xni)) in x.iter().zip(&xn).enumerate() {
            out[self.layout.position(c)] = *xi - *xni;
        }
        for (j, (si, sni)) in s.iter().zip(&sn).enumerate() {
            out[self.layout.position(np + j)] = *si - *sni;
        }
    }

    /// Evaluated from the iterate alone, without caches.
    fn eval_block(&self, z: &[T], block: usize, out: &mut [T]) {
        let np = self.layout.primal();
        let two = T::lit(2.0);
        for (o, p) in out.iter_mut().zip(self.partition().range(block)) {
            let c = self.layout.canonical(p);
            *o = if c < np {
                self.eta.get(c) * self.ats_entry(z, c)
            } else {
                let j = c - np;
                let (idx, val) = self.a.row(j);
                let mut ax = T::zero();
                let mut a_eta_ats = T::zero();
                for (&k, &v) in idx.iter().zip(val) {
                    ax += v * z[self.layout.position(k)];
                    a_eta_ats += v * self.eta.get(k) * self.ats_entry(z, k);
                }
                let sj = z[p];
                sj - self.prox.prox_entry(j, sj + self.gamma.get(j) * (ax - two * a_eta_ats))
            };
        }
    }

    fn session(&self, z: &[T]) -> Box<dyn CoordinateSession<T> + '_> {
        Box::new(PdSession {
            op: self,
            cache: self.fresh_cache(z),
            delta: vec![T::zero(); self.partition().max_block_len()],
        })
    }
}

struct PdSession<'a, T> {
    op: &'a SimplifiedPd<T>,
    cache: PdCache<T>,
    delta: Vec<T>,
}

impl<T: Scalar> CoordinateSession<T> for PdSession<'_, T> {
    fn step(&mut self, z: &mut [T], block: usize, alpha: T) {
        let len = self.op.partition().block_len(block);
        self.op.cached_step(z, &mut self.cache, &mut self.delta[..len], block, alpha);
    }

    fn end_epoch(&mut self, z: &[T]) {
        if self.op.refresh.at_epoch_end {
            self.cache = self.op.fresh_cache(z);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{IdentityProx, LinfBallProx};
    use super::*;
    use crate::linalg::rel_dist;

    fn small() -> SimplifiedPd<f64> {
        // 3x2
        let a = SparseMatrix::from_triplets(3, 2, &[(0, 0, 1.0), (1, 1, -2.0), (2, 0, 0.5), (2, 1, 1.5)]).unwrap();
        build_simplified(
            a,
            Box::new(LinfBallProx::new(1.0).unwrap()),
            Steps::Diagonal(vec![0.3, 0.2]),
            Steps::Uniform(0.4),
            StackedLayout::singletons(2, 3).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn zero_dual_substitution() {
        let op = small();
        let (xn, sn) = op.full_update(&[1.0, -1.0], &[0.0, 0.0, 0.0]);
        assert_eq!(xn, vec![1.0, -1.0]);
        // gamma A x = 0.4 * (1, 2, -1)
        assert_eq!(sn, vec![0.4, 0.8, -0.4]);
    }

    #[test]
    fn primal_step_keeps_ax_exact() {
        let op = small();
        let mut st = op.init_state(vec![1.0, -1.0, 0.2, -0.1, 0.3]).unwrap();
        op.coord_step_cached(&mut st, 0, 1.0).unwrap();
        let fresh = op.fresh_cache(&st.z);
        assert!(rel_dist(&st.cache.ax, &fresh.ax) < 1e-15);
        assert_eq!(st.cache.staleness, 1);
    }

    #[test]
    fn zero_delta_leaves_state() {
        let a = SparseMatrix::from_triplets(1, 1, &[(0, 0, 1.0)]).unwrap();
        let op = build_simplified(
            a,
            Box::new(IdentityProx),
            Steps::Uniform(1.0),
            Steps::Uniform(1.0),
            StackedLayout::singletons(1, 1).unwrap(),
        )
        .unwrap();
        // s = 0 gives a zero primal residual
        let mut st = op.init_state(vec![2.0, 0.0]).unwrap();
        let before = st.clone();
        op.coord_step_cached(&mut st, 0, 1.0).unwrap();
        assert_eq!(st.z, before.z);
        assert_eq!(st.cache.ax, before.cache.ax);
        assert_eq!(st.cache.ats, before.cache.ats);
    }

    #[test]
    fn block_matches_full() {
        let op = small();
        let z = [0.7, -0.2, 0.5, -0.9, 0.1];
        let mut full = [0.0; 5];
        op.eval_full(&z, &mut full);
        for b in 0..5 {
            let mut out = [0.0];
            op.eval_block(&z, b, &mut out);
            assert!((out[0] - full[b]).abs() <= 1e-14 * (1.0 + full[b].abs()));
        }
    }
}
