//! Order-preserving data parallelism; sequential without the `parallel`
//! feature. Results never depend on the worker count.

/// Apply `f(z, slab)` to each z-slab of `out` (`slab_len` elements each).
#[cfg(feature = "parallel")]
pub(crate) fn for_each_slab<T: Send>(out: &mut [T], slab_len: usize, f: impl Fn(usize, &mut [T]) + Sync + Send) {
    use rayon::prelude::*;
    out.par_chunks_mut(slab_len).enumerate().for_each(|(z, s)| f(z, s));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_slab<T: Send>(out: &mut [T], slab_len: usize, f: impl Fn(usize, &mut [T]) + Sync + Send) {
    out.chunks_mut(slab_len).enumerate().for_each(|(z, s)| f(z, s));
}
