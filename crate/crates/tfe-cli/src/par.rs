//! Order-preserving parallel map over a slice, using scoped threads with
//! contiguous chunks. Results land in their input positions, so output order
//! never depends on the worker count.

pub fn par_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let n = items.len();
    if n == 0 {
        return Vec::new();
    }
    let workers = threads.clamp(1, n);
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = n.div_ceil(workers);
    let mut out: Vec<Option<R>> = (0..n).map(|_| None).collect();
    std::thread::scope(|scope| {
        let f = &f;
        let mut rest: &mut [Option<R>] = &mut out;
        let mut start = 0;
        while start < n {
            let take = chunk.min(n - start);
            let (head, tail) = rest.split_at_mut(take);
            rest = tail;
            let input = &items[start..start + take];
            scope.spawn(move || {
                for (slot, item) in head.iter_mut().zip(input) {
                    *slot = Some(f(item));
                }
            });
            start += take;
        }
    });
    out.into_iter().map(|r| r.expect("all chunks filled")).collect()
}
