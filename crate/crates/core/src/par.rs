//! Data-parallel helpers. With the `parallel` feature the work is spread over
//! the rayon pool; without it (or with [`Execution::Sequential`]) it runs on the
//! calling thread. Results are always returned in input order, so both paths
//! produce identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether work actually fans out (false when the feature is compiled out).
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// `f` over every item, results in input order.
    pub fn map<I, O, F>(self, items: Vec<I>, f: F) -> Vec<O>
    where
        I: Send,
        O: Send,
        F: Fn(I) -> O + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.into_par_iter().map(f).collect();
        }
        items.into_iter().map(f).collect()
    }

    /// `f` over `0..n` split into chunks of `chunk` indices, results in order.
    pub fn map_chunks<O, F>(self, n: usize, chunk: usize, f: F) -> Vec<O>
    where
        O: Send,
        F: Fn(std::ops::Range<usize>) -> O + Sync + Send,
    {
        let chunk = chunk.max(1);
        let ranges: Vec<_> = (0..n).step_by(chunk).map(|s| s..(s + chunk).min(n)).collect();
        self.map(ranges, f)
    }

    /// Fills `out` by calling `f(i, &mut out[i*width..])` for each row.
    pub fn for_each_row<T, F>(self, out: &mut [T], width: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            out.par_chunks_mut(width).enumerate().for_each(|(i, row)| f(i, row));
            return;
        }
        out.chunks_mut(width).enumerate().for_each(|(i, row)| f(i, row));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_paths_agree() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = Execution::Sequential.map(items.clone(), |x| x * x);
        let par = Execution::Parallel.map(items, |x| x * x);
        assert_eq!(seq, par);

        let seq = Execution::Sequential.map_chunks(103, 10, |r| r.sum::<usize>());
        let par = Execution::Parallel.map_chunks(103, 10, |r| r.sum::<usize>());
        assert_eq!(seq, par);
        assert_eq!(seq.len(), 11);

        let mut a = vec![0usize; 30];
        let mut b = vec![0usize; 30];
        Execution::Sequential.for_each_row(&mut a, 3, |i, row| row.iter_mut().for_each(|v| *v = i));
        Execution::Parallel.for_each_row(&mut b, 3, |i, row| row.iter_mut().for_each(|v| *v = i));
        assert_eq!(a, b);
    }
}
