//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper returns results in index order, so outputs never depend on the
//! execution mode. Without the `parallel` feature, [`Parallelism::Parallel`]
//! silently runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

impl Parallelism {
    /// Whether work is actually dispatched to the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }
}

/// Evaluate `f(0..n)` and collect in order.
pub fn map_range<T, F>(mode: Parallelism, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

/// Run `f(chunk_index, chunk)` over `chunk_len`-sized mutable chunks.
pub fn for_each_chunk_mut<T, F>(mode: Parallelism, data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk_len = chunk_len.max(1);
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = mode;
    data.chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let a = map_range(Parallelism::Sequential, 1000, |i| i * i);
        let b = map_range(Parallelism::Parallel, 1000, |i| i * i);
        assert_eq!(a, b);

        let mut x = vec![0usize; 103];
        let mut y = x.clone();
        for_each_chunk_mut(Parallelism::Sequential, &mut x, 10, |ci, c| {
            c.iter_mut().enumerate().for_each(|(j, v)| *v = ci * 10 + j)
        });
        for_each_chunk_mut(Parallelism::Parallel, &mut y, 10, |ci, c| {
            c.iter_mut().enumerate().for_each(|(j, v)| *v = ci * 10 + j)
        });
        assert_eq!(x, y);
        assert_eq!(x, (0..103).collect::<Vec<_>>());
    }
}
